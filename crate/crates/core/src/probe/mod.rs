//! Hidden-state pooling, the prober network and ensemble voting.

mod checkpoint;
mod prober;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use checkpoint::{load_ensemble, read_prober, save_ensemble, write_prober};
pub use prober::{ForwardMode, ProberParams};

/// Index of a transformer layer (1-based, as exported by the generator).
pub type LayerIndex = u32;

/// Variance below which a pooled vector is treated as constant.
pub const VARIANCE_EPSILON: f64 = 1e-12;

/// Layers probed by default (even layers from the 6th of an 18-layer model).
pub const DEFAULT_LAYERS: [LayerIndex; 5] = [6, 8, 10, 12, 14];

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("non-finite hidden state at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("missing pooled input for layer {0}")]
    MissingLayer(LayerIndex),
    #[error("train-mode dropout needs an rng seed")]
    MissingSeed,
    #[error("ensemble has no probers")]
    EmptyEnsemble,
    #[error("invalid prober: {0}")]
    InvalidParams(String),
    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: String, reason: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-layer hidden states for the `u` generated rationale and answer tokens.
///
/// Every layer holds a `u x d_model` matrix. Serialized as a JSON object keyed
/// by layer index whose values are arrays of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "BTreeMap<LayerIndex, Vec<Vec<f64>>>",
    into = "BTreeMap<LayerIndex, Vec<Vec<f64>>>"
)]
pub struct HiddenTrace {
    layers: BTreeMap<LayerIndex, Vec<Vec<f64>>>,
    tokens: usize,
    d_model: usize,
}

impl HiddenTrace {
    pub fn new(layers: BTreeMap<LayerIndex, Vec<Vec<f64>>>) -> Result<Self, ProbeError> {
        let mut shape: Option<(usize, usize)> = None;
        for (&layer, rows) in &layers {
            if layer == 0 {
                return Err(ProbeError::Dimension("layer indices start at 1".into()));
            }
            if rows.is_empty() {
                return Err(ProbeError::Dimension(format!(
                    "layer {layer} has no token rows (u must be >= 1)"
                )));
            }
            let width = rows[0].len();
            if width == 0 {
                return Err(ProbeError::Dimension(format!("layer {layer} has d_model = 0")));
            }
            if let Some(bad) = rows.iter().position(|r| r.len() != width) {
                return Err(ProbeError::Dimension(format!(
                    "layer {layer} row {bad} has {} columns, expected {width}",
                    rows[bad].len()
                )));
            }
            match shape {
                None => shape = Some((rows.len(), width)),
                Some((u, d)) if (u, d) != (rows.len(), width) => {
                    return Err(ProbeError::Dimension(format!(
                        "layer {layer} is {}x{width}, other layers are {u}x{d}",
                        rows.len()
                    )))
                }
                Some(_) => {}
            }
        }
        let (tokens, d_model) =
            shape.ok_or_else(|| ProbeError::Dimension("hidden trace has no layers".into()))?;
        Ok(Self { layers, tokens, d_model })
    }

    /// Number of generated tokens covered (`u`).
    pub fn tokens(&self) -> usize {
        self.tokens
    }

    pub fn d_model(&self) -> usize {
        self.d_model
    }

    pub fn layer(&self, layer: LayerIndex) -> Option<&[Vec<f64>]> {
        self.layers.get(&layer).map(Vec::as_slice)
    }

    pub fn layer_indices(&self) -> impl Iterator<Item = LayerIndex> + '_ {
        self.layers.keys().copied()
    }

    /// Keeps only the given layers. Fails if any of them is absent.
    pub fn restrict_to(&self, wanted: &[LayerIndex]) -> Result<Self, LayerIndex> {
        let mut layers = BTreeMap::new();
        for &l in wanted {
            let rows = self.layers.get(&l).ok_or(l)?;
            layers.insert(l, rows.clone());
        }
        Ok(Self { layers, tokens: self.tokens, d_model: self.d_model })
    }

    /// Pools every layer, or only `wanted` when given.
    pub fn pool(
        &self,
        wanted: Option<&[LayerIndex]>,
    ) -> Result<BTreeMap<LayerIndex, Vec<f64>>, ProbeError> {
        let layers: Vec<LayerIndex> = match wanted {
            Some(w) => w.to_vec(),
            None => self.layers.keys().copied().collect(),
        };
        layers
            .into_iter()
            .map(|l| {
                let rows = self.layer(l).ok_or(ProbeError::MissingLayer(l))?;
                Ok((l, pool_hidden_states(rows)?))
            })
            .collect()
    }
}

impl TryFrom<BTreeMap<LayerIndex, Vec<Vec<f64>>>> for HiddenTrace {
    type Error = ProbeError;

    fn try_from(layers: BTreeMap<LayerIndex, Vec<Vec<f64>>>) -> Result<Self, Self::Error> {
        Self::new(layers)
    }
}

impl From<HiddenTrace> for BTreeMap<LayerIndex, Vec<Vec<f64>>> {
    fn from(trace: HiddenTrace) -> Self {
        trace.layers
    }
}

/// Mean over the token rows, then standardized across the model dimension.
///
/// Standardization uses the population variance. A mean vector whose variance
/// is below [`VARIANCE_EPSILON`] maps to the zero vector.
pub fn pool_hidden_states<R: AsRef<[f64]>>(rows: &[R]) -> Result<Vec<f64>, ProbeError> {
    let first = rows
        .first()
        .ok_or_else(|| ProbeError::Dimension("no token rows to pool".into()))?;
    let d_model = first.as_ref().len();
    if d_model == 0 {
        return Err(ProbeError::Dimension("d_model is 0".into()));
    }

    let mut mean = vec![0.0; d_model];
    for (r, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != d_model {
            return Err(ProbeError::Dimension(format!(
                "row {r} has {} columns, expected {d_model}",
                row.len()
            )));
        }
        for (c, (acc, &v)) in mean.iter_mut().zip(row).enumerate() {
            if !v.is_finite() {
                return Err(ProbeError::NonFinite { row: r, col: c });
            }
            *acc += v;
        }
    }
    let u = rows.len() as f64;
    mean.iter_mut().for_each(|m| *m /= u);

    standardize(&mut mean);
    Ok(mean)
}

/// In-place zero-mean / unit-variance standardization with the epsilon guard.
pub(crate) fn standardize(values: &mut [f64]) {
    let n = values.len() as f64;
    let mu = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
    if var < VARIANCE_EPSILON {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let std = var.sqrt();
    values.iter_mut().for_each(|v| *v = (*v - mu) / std);
}

/// Outcome of soft voting across the ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalDecision {
    /// Sum of per-layer logits at index 0 ("call retrieval").
    pub sum_call: f64,
    /// Sum of per-layer logits at index 1 ("pass").
    pub sum_pass: f64,
    pub theta: f64,
    pub retrieve: bool,
    #[serde(default)]
    pub layer_logits: BTreeMap<LayerIndex, [f64; 2]>,
}

impl RetrievalDecision {
    pub fn from_sums(sum_call: f64, sum_pass: f64, theta: f64) -> Self {
        Self {
            sum_call,
            sum_pass,
            theta,
            retrieve: should_retrieve(sum_call, sum_pass, theta),
            layer_logits: BTreeMap::new(),
        }
    }

    /// Re-evaluates the stored sums under another threshold.
    pub fn retrieve_at(&self, theta: f64) -> bool {
        should_retrieve(self.sum_call, self.sum_pass, theta)
    }
}

/// Strict inequality: a tie passes.
pub fn should_retrieve(sum_call: f64, sum_pass: f64, theta: f64) -> bool {
    sum_call + theta > sum_pass
}

/// Keyed set of per-layer probers plus the decision threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ProberEnsemble {
    probers: BTreeMap<LayerIndex, ProberParams>,
    pub theta: f64,
}

impl ProberEnsemble {
    pub fn new(
        probers: BTreeMap<LayerIndex, ProberParams>,
        theta: f64,
    ) -> Result<Self, ProbeError> {
        let first = probers.values().next().ok_or(ProbeError::EmptyEnsemble)?;
        let d_model = first.d_model();
        for (&layer, p) in &probers {
            if p.d_model() != d_model {
                return Err(ProbeError::Dimension(format!(
                    "prober for layer {layer} has d_model {}, expected {d_model}",
                    p.d_model()
                )));
            }
            if p.layer != layer {
                return Err(ProbeError::InvalidParams(format!(
                    "prober keyed at layer {layer} records layer {}",
                    p.layer
                )));
            }
        }
        Ok(Self { probers, theta })
    }

    pub fn d_model(&self) -> usize {
        self.probers.values().next().map(ProberParams::d_model).unwrap_or(0)
    }

    pub fn layers(&self) -> Vec<LayerIndex> {
        self.probers.keys().copied().collect()
    }

    pub fn prober(&self, layer: LayerIndex) -> Option<&ProberParams> {
        self.probers.get(&layer)
    }

    pub fn probers(&self) -> &BTreeMap<LayerIndex, ProberParams> {
        &self.probers
    }

    /// Sub-ensemble over `layers`, keeping the threshold.
    pub fn subset(&self, layers: &[LayerIndex]) -> Result<Self, ProbeError> {
        let probers = layers
            .iter()
            .map(|l| {
                self.probers
                    .get(l)
                    .cloned()
                    .map(|p| (*l, p))
                    .ok_or(ProbeError::MissingLayer(*l))
            })
            .collect::<Result<_, _>>()?;
        Self::new(probers, self.theta)
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    /// Sums eval-mode logits over the ensemble's layers (in ascending layer
    /// order) and applies the threshold.
    pub fn decide(
        &self,
        pooled: &BTreeMap<LayerIndex, Vec<f64>>,
    ) -> Result<RetrievalDecision, ProbeError> {
        let mut sum_call = 0.0;
        let mut sum_pass = 0.0;
        let mut layer_logits = BTreeMap::new();
        for (&layer, prober) in &self.probers {
            let x = pooled.get(&layer).ok_or(ProbeError::MissingLayer(layer))?;
            let logits = prober.forward(x, ForwardMode::Eval)?;
            sum_call += logits[0];
            sum_pass += logits[1];
            layer_logits.insert(layer, logits);
        }
        let mut decision = RetrievalDecision::from_sums(sum_call, sum_pass, self.theta);
        decision.layer_logits = layer_logits;
        Ok(decision)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn identity_prober(layer: LayerIndex, call: f64, pass: f64) -> ProberParams {
        // d=1, h=1 network whose output is the constant bias.
        let mut p = ProberParams::zeros(layer, 1, 1, 0.0);
        p.b2 = [call, pass];
        p
    }

    #[test]
    fn pool_single_token_is_standardized_identity() {
        let out = pool_hidden_states(&[vec![1.0, 3.0]]).unwrap();
        assert_eq!(out, vec![-1.0, 1.0]);
    }

    #[test]
    fn pool_two_tokens() {
        let out = pool_hidden_states(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!((out[0] + 1.0).abs() < 1e-12);
        assert!((out[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pool_constant_vector_is_zero() {
        assert_eq!(pool_hidden_states(&[vec![5.0, 5.0, 5.0]]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn pool_rejects_empty_and_non_finite() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(matches!(pool_hidden_states(&empty), Err(ProbeError::Dimension(_))));
        assert!(matches!(
            pool_hidden_states(&[vec![1.0, f64::NAN]]),
            Err(ProbeError::NonFinite { row: 0, col: 1 })
        ));
        assert!(matches!(
            pool_hidden_states(&[vec![1.0, 2.0], vec![1.0]]),
            Err(ProbeError::Dimension(_))
        ));
    }

    #[test]
    fn hidden_trace_shape_checks() {
        let mut layers = BTreeMap::new();
        layers.insert(6, vec![vec![1.0, 2.0]]);
        layers.insert(8, vec![vec![1.0, 2.0], vec![0.0, 0.0]]);
        assert!(HiddenTrace::new(layers).is_err());

        let mut layers = BTreeMap::new();
        layers.insert(6, vec![]);
        assert!(HiddenTrace::new(layers).is_err());

        let json = r#"{"6": [[1.0, 2.0]], "8": [[3.0, 4.0]]}"#;
        let trace: HiddenTrace = serde_json::from_str(json).unwrap();
        assert_eq!(trace.tokens(), 1);
        assert_eq!(trace.d_model(), 2);
        assert_eq!(trace.layer_indices().collect::<Vec<_>>(), vec![6, 8]);
        assert!(serde_json::from_str::<HiddenTrace>(r#"{"6": []}"#).is_err());
    }

    #[test]
    fn decide_examples() {
        let mut probers = BTreeMap::new();
        probers.insert(6, identity_prober(6, 1.0, 0.5));
        let ens = ProberEnsemble::new(probers, 0.0).unwrap();
        let pooled = BTreeMap::from([(6, vec![0.0])]);
        assert!(ens.decide(&pooled).unwrap().retrieve);

        let mut probers = BTreeMap::new();
        probers.insert(6, identity_prober(6, 0.2, 0.5));
        let ens = ProberEnsemble::new(probers, 0.0).unwrap();
        assert!(!ens.decide(&pooled).unwrap().retrieve);
        let ens = ens.with_theta(1.0);
        assert!(ens.decide(&pooled).unwrap().retrieve);
    }

    #[test]
    fn decide_tie_passes() {
        assert!(!should_retrieve(0.5, 0.5, 0.0));
    }

    #[test]
    fn decide_missing_layer() {
        let probers = BTreeMap::from([(6, identity_prober(6, 1.0, 0.0))]);
        let ens = ProberEnsemble::new(probers, 0.0).unwrap();
        let pooled = BTreeMap::from([(8, vec![0.0])]);
        assert!(matches!(ens.decide(&pooled), Err(ProbeError::MissingLayer(6))));
    }

    #[test]
    fn ensemble_rejects_mixed_widths() {
        let probers = BTreeMap::from([
            (6, ProberParams::zeros(6, 2, 1, 0.0)),
            (8, ProberParams::zeros(8, 3, 1, 0.0)),
        ]);
        assert!(ProberEnsemble::new(probers, 0.0).is_err());
        assert!(matches!(
            ProberEnsemble::new(BTreeMap::new(), 0.0),
            Err(ProbeError::EmptyEnsemble)
        ));
    }

    proptest! {
        #[test]
        fn pooling_is_row_permutation_invariant(
            rows in prop::collection::vec(prop::collection::vec(-10.0f64..10.0, 4), 1..6),
            rot in 0usize..6,
        ) {
            let a = pool_hidden_states(&rows).unwrap();
            let mut shuffled = rows.clone();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let b = pool_hidden_states(&shuffled).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn pooled_vectors_are_standardized(
            rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 2..12), 1..5)
                .prop_filter("equal widths", |rs| rs.iter().all(|r| r.len() == rs[0].len())),
        ) {
            let out = pool_hidden_states(&rows).unwrap();
            let n = out.len() as f64;
            let mean = out.iter().sum::<f64>() / n;
            let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            if out.iter().all(|v| *v == 0.0) {
                prop_assert!(var == 0.0);
            } else {
                prop_assert!(mean.abs() < 1e-6);
                prop_assert!((var - 1.0).abs() < 1e-6);
            }
        }

        #[test]
        fn theta_is_monotone(call in -5.0f64..5.0, pass in -5.0f64..5.0, t in -3.0f64..3.0, dt in 0.0f64..3.0) {
            if should_retrieve(call, pass, t) {
                prop_assert!(should_retrieve(call, pass, t + dt));
            }
        }

        #[test]
        fn decision_is_layer_order_invariant(
            logits in prop::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..6),
        ) {
            let layers: Vec<LayerIndex> = (0..logits.len() as u32).map(|i| 2 * i + 6).collect();
            let forward: BTreeMap<_, _> = layers.iter().zip(&logits)
                .map(|(&l, &(c, p))| (l, identity_prober(l, c, p))).collect();
            let mut reversed = BTreeMap::new();
            for (&l, &(c, p)) in layers.iter().zip(&logits).rev() {
                reversed.insert(l, identity_prober(l, c, p));
            }
            let pooled: BTreeMap<_, _> = layers.iter().map(|&l| (l, vec![0.0])).collect();
            let a = ProberEnsemble::new(forward, 0.0).unwrap().decide(&pooled).unwrap();
            let b = ProberEnsemble::new(reversed, 0.0).unwrap().decide(&pooled).unwrap();
            prop_assert_eq!(a.sum_call.to_bits(), b.sum_call.to_bits());
            prop_assert_eq!(a.sum_pass.to_bits(), b.sum_pass.to_bits());
        }
    }
}
