//! Threshold and layer-subset sweeps: one full re-run and report per setting.

use serde::Serialize;

use crate::eval::{self, MetricsReport, Prediction, ReportFormat};
use crate::pipeline::{run_batch, Generator, PipelineConfig, Question, QueryFailure};
use crate::probe::{LayerIndex, ProbeError, ProberEnsemble};
use crate::retrieval::CorpusIndex;

pub const DEFAULT_THETAS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];

/// One setting of a sweep: the ensemble and pipeline config to run with.
#[derive(Debug, Clone)]
pub struct SweepSetting {
    pub label: String,
    pub ensemble: ProberEnsemble,
    pub config: PipelineConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub setting: String,
    pub report: MetricsReport,
}

pub fn theta_settings(
    ensemble: &ProberEnsemble,
    base: &PipelineConfig,
    thetas: &[f64],
) -> Vec<SweepSetting> {
    thetas
        .iter()
        .map(|&theta| SweepSetting {
            label: format!("theta={theta}"),
            ensemble: ensemble.clone(),
            config: PipelineConfig { theta, ..base.clone() },
        })
        .collect()
}

/// Growing prefixes of the ensemble's ascending layers: `{l1}, {l1,l2}, ...`.
pub fn layer_prefix_settings(
    ensemble: &ProberEnsemble,
    base: &PipelineConfig,
) -> Result<Vec<SweepSetting>, ProbeError> {
    let layers = ensemble.layers();
    (1..=layers.len())
        .map(|k| {
            let subset: Vec<LayerIndex> = layers[..k].to_vec();
            let names: Vec<String> = subset.iter().map(|l| l.to_string()).collect();
            Ok(SweepSetting {
                label: format!("layers={}", names.join(",")),
                ensemble: ensemble.subset(&subset)?,
                config: base.clone(),
            })
        })
        .collect()
}

/// Runs every setting over all questions. Stops at the first failed question.
pub fn run_sweep(
    questions: &[Question],
    golds: &std::collections::BTreeMap<String, Vec<String>>,
    index: &CorpusIndex,
    client: &dyn Generator,
    settings: &[SweepSetting],
    parallelism: usize,
) -> Result<Vec<SweepRow>, QueryFailure> {
    let mut rows = Vec::with_capacity(settings.len());
    for s in settings {
        let mut preds = Vec::with_capacity(questions.len());
        for r in run_batch(questions, &s.ensemble, index, client, &s.config, parallelism) {
            preds.push(Prediction::from(&r?));
        }
        rows.push(SweepRow { setting: s.label.clone(), report: eval::score(&preds, golds) });
    }
    Ok(rows)
}

/// TSV with a leading `setting` column, or one JSON object per line.
pub fn render_sweep(rows: &[SweepRow], format: ReportFormat) -> String {
    let mut s = String::new();
    match format {
        ReportFormat::Tsv => {
            s.push_str(&format!("setting\t{}\n", eval::TSV_HEADER));
            for r in rows {
                s.push_str(&format!("{}\t{}\n", r.setting, eval::tsv_row(&r.report)));
            }
        }
        ReportFormat::Json => {
            for r in rows {
                s.push_str(&serde_json::to_string(r).expect("row serializes"));
                s.push('\n');
            }
        }
    }
    s
}
