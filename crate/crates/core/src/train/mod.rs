//! Prober dataset construction and training.

mod dataset;
mod logits;
mod trainer;

use thiserror::Error;

pub use dataset::{balance_dataset, label_trace, LabeledExample, TraceRecord};
pub use logits::{dump_logits, LOGIT_CSV_HEADER};
pub use trainer::{
    evaluate_prober, train_probers, LayerReport, TrainConfig, TrainReport,
};

use crate::probe::{LayerIndex, ProbeError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("data error: {0}")]
    Data(String),
    #[error("cannot balance: {positives} positive and {negatives} negative examples")]
    Balance { positives: usize, negatives: usize },
    #[error("training diverged for layer {layer} at step {step} (loss is not finite)")]
    Diverged { layer: LayerIndex, step: usize },
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Probe(#[from] ProbeError),
}
