//! Text checkpoints for probers and ensemble manifests.
//!
//! Prober file (`.prober`):
//!
//! ```text
//! probe-rag-prober v1
//! layer 6
//! d_model 16
//! hidden 128
//! dropout_rate 0.1
//! norm_gain <d_model values>
//! norm_bias <d_model values>
//! w1 <d_model * hidden values, row-major>
//! b1 <hidden values>
//! w2 <hidden * 2 values, row-major>
//! b2 <2 values>
//! ```
//!
//! Ensemble manifest:
//!
//! ```text
//! probe-rag-ensemble v1
//! theta 0
//! prober 6 layer6.prober
//! prober 8 layer8.prober
//! ```
//!
//! Member paths are resolved relative to the manifest's directory. Floats are
//! written in shortest round-trip form so save/load is lossless.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::{LayerIndex, ProbeError, ProberEnsemble, ProberParams};

const PROBER_MAGIC: &str = "probe-rag-prober v1";
const ENSEMBLE_MAGIC: &str = "probe-rag-ensemble v1";

fn join(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").unwrap();
    }
    out
}

pub fn prober_to_string(p: &ProberParams) -> String {
    let mut s = String::new();
    writeln!(s, "{PROBER_MAGIC}").unwrap();
    writeln!(s, "layer {}", p.layer).unwrap();
    writeln!(s, "d_model {}", p.d_model()).unwrap();
    writeln!(s, "hidden {}", p.hidden()).unwrap();
    writeln!(s, "dropout_rate {:?}", p.dropout_rate).unwrap();
    writeln!(s, "norm_gain {}", join(&p.norm_gain)).unwrap();
    writeln!(s, "norm_bias {}", join(&p.norm_bias)).unwrap();
    writeln!(s, "w1 {}", join(&p.w1)).unwrap();
    writeln!(s, "b1 {}", join(&p.b1)).unwrap();
    writeln!(s, "w2 {}", join(&p.w2)).unwrap();
    writeln!(s, "b2 {}", join(&p.b2)).unwrap();
    s
}

pub fn prober_from_str(text: &str) -> Result<ProberParams, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(l) if l.trim() == PROBER_MAGIC => {}
        Some(l) => return Err(format!("unsupported header {l:?}")),
        None => return Err("empty file".into()),
    }
    let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
    for line in lines {
        let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
        if fields.insert(key, rest.trim()).is_some() {
            return Err(format!("duplicate field {key}"));
        }
    }
    let field = |k: &str| fields.get(k).copied().ok_or_else(|| format!("missing field {k}"));
    let int = |k: &str| -> Result<usize, String> {
        field(k)?.parse().map_err(|e| format!("field {k}: {e}"))
    };
    let floats = |k: &str, n: usize| -> Result<Vec<f64>, String> {
        let v: Vec<f64> = field(k)?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|e| format!("field {k}: {e}")))
            .collect::<Result<_, _>>()?;
        if v.len() != n {
            return Err(format!("field {k} has {} values, expected {n}", v.len()));
        }
        Ok(v)
    };

    let layer = int("layer")? as LayerIndex;
    let d = int("d_model")?;
    let h = int("hidden")?;
    let dropout_rate = field("dropout_rate")?
        .parse::<f64>()
        .map_err(|e| format!("field dropout_rate: {e}"))?;
    let b2 = floats("b2", 2)?;
    let p = ProberParams {
        layer,
        dropout_rate,
        norm_gain: floats("norm_gain", d)?,
        norm_bias: floats("norm_bias", d)?,
        w1: floats("w1", d * h)?,
        b1: floats("b1", h)?,
        w2: floats("w2", h * 2)?,
        b2: [b2[0], b2[1]],
    };
    p.validate().map_err(|e| e.to_string())?;
    Ok(p)
}

fn io_err(path: &Path, source: std::io::Error) -> ProbeError {
    ProbeError::Io { path: path.display().to_string(), source }
}

fn ckpt_err(path: &Path, reason: impl Into<String>) -> ProbeError {
    ProbeError::Checkpoint { path: path.display().to_string(), reason: reason.into() }
}

pub fn write_prober(path: &Path, p: &ProberParams) -> Result<(), ProbeError> {
    fs::write(path, prober_to_string(p)).map_err(|e| io_err(path, e))
}

pub fn read_prober(path: &Path) -> Result<ProberParams, ProbeError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    prober_from_str(&text).map_err(|r| ckpt_err(path, r))
}

/// Writes one `layer{N}.prober` per member plus `manifest_path`.
pub fn save_ensemble(manifest_path: &Path, ensemble: &ProberEnsemble) -> Result<(), ProbeError> {
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut manifest = format!("{ENSEMBLE_MAGIC}\ntheta {:?}\n", ensemble.theta);
    for (layer, prober) in ensemble.probers() {
        let name = format!("layer{layer}.prober");
        write_prober(&dir.join(&name), prober)?;
        writeln!(manifest, "prober {layer} {name}").unwrap();
    }
    fs::write(manifest_path, manifest).map_err(|e| io_err(manifest_path, e))
}

pub fn load_ensemble(manifest_path: &Path) -> Result<ProberEnsemble, ProbeError> {
    let text = fs::read_to_string(manifest_path).map_err(|e| io_err(manifest_path, e))?;
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
    if lines.next().map(str::trim) != Some(ENSEMBLE_MAGIC) {
        return Err(ckpt_err(manifest_path, "missing ensemble header"));
    }
    let mut theta = None;
    let mut probers = BTreeMap::new();
    for line in lines {
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            ["theta", v] => {
                theta = Some(v.parse::<f64>().map_err(|e| ckpt_err(manifest_path, e.to_string()))?)
            }
            ["prober", layer, file] => {
                let layer: LayerIndex =
                    layer.parse().map_err(|_| ckpt_err(manifest_path, format!("bad layer {layer}")))?;
                let path: PathBuf = dir.join(file);
                let p = read_prober(&path)?;
                if p.layer != layer {
                    return Err(ckpt_err(
                        &path,
                        format!("manifest lists layer {layer}, checkpoint records {}", p.layer),
                    ));
                }
                if probers.insert(layer, p).is_some() {
                    return Err(ckpt_err(manifest_path, format!("layer {layer} listed twice")));
                }
            }
            _ => return Err(ckpt_err(manifest_path, format!("unrecognized line {line:?}"))),
        }
    }
    let theta = theta.ok_or_else(|| ckpt_err(manifest_path, "missing theta"))?;
    ProberEnsemble::new(probers, theta)
}
