use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::probe::{HiddenTrace, LayerIndex, ProbeError};

/// One generation kept for prober training, with or without passages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub question_id: String,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub with_retrieval: bool,
    pub rationale: String,
    pub answer: String,
    pub hidden_states: HiddenTrace,
}

/// Pooled per-layer inputs with label `y` (1: answer correct, no retrieval
/// needed; 0: retrieval needed).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    #[serde(default)]
    pub question_id: String,
    pub pooled: BTreeMap<LayerIndex, Vec<f64>>,
    pub y: u8,
    pub with_retrieval: bool,
}

pub fn label_trace(
    trace: &TraceRecord,
    layers: &[LayerIndex],
    accuracy_fn: impl Fn(&str, &[String]) -> bool,
) -> Result<LabeledExample, TrainError> {
    let pooled = trace.hidden_states.pool(Some(layers)).map_err(|e| match e {
        ProbeError::MissingLayer(l) => TrainError::Data(format!(
            "trace {} (with_retrieval={}) has no hidden states for layer {l}",
            trace.question_id, trace.with_retrieval
        )),
        other => TrainError::Probe(other),
    })?;
    Ok(LabeledExample {
        question_id: trace.question_id.clone(),
        pooled,
        y: u8::from(accuracy_fn(&trace.answer, &trace.gold_answers)),
        with_retrieval: trace.with_retrieval,
    })
}

/// Downsamples the majority label (seeded, uniform) to the minority count.
/// Surviving examples keep their input order.
pub fn balance_dataset(
    examples: Vec<LabeledExample>,
    seed: u64,
) -> Result<Vec<LabeledExample>, TrainError> {
    let (pos, neg): (Vec<usize>, Vec<usize>) =
        (0..examples.len()).partition(|&i| examples[i].y == 1);
    if pos.is_empty() || neg.is_empty() {
        return Err(TrainError::Balance { positives: pos.len(), negatives: neg.len() });
    }
    let (minority, majority) = if pos.len() <= neg.len() { (pos, neg) } else { (neg, pos) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; examples.len()];
    minority.iter().for_each(|&i| keep[i] = true);
    for k in sample(&mut rng, majority.len(), minority.len()) {
        keep[majority[k]] = true;
    }
    Ok(examples.into_iter().zip(keep).filter_map(|(e, k)| k.then_some(e)).collect())
}
