use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LabeledExample, TrainError};
use crate::probe::{ForwardMode, LayerIndex, ProberEnsemble, ProberParams};

/// Training hyperparameters. Defaults: lr 1e-3, batch 12, 2 epochs,
/// dropout 0.1, exponential decay 0.995 per optimizer step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout: f64,
    pub scheduler_gamma: f64,
    pub weight_decay: f64,
    pub hidden: usize,
    /// Optimizer steps between validation checks once checkpointing starts.
    pub eval_every: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 12,
            epochs: 2,
            dropout: 0.1,
            scheduler_gamma: 0.995,
            weight_decay: 0.01,
            hidden: 128,
            eval_every: 100,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be > 0");
        }
        if self.batch_size == 0 || self.epochs == 0 || self.hidden == 0 || self.eval_every == 0 {
            return bad("batch_size, epochs, hidden and eval_every must be >= 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if !(self.scheduler_gamma > 0.0 && self.scheduler_gamma <= 1.0) {
            return bad("scheduler_gamma must be in (0, 1]");
        }
        if self.weight_decay < 0.0 {
            return bad("weight_decay must be >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    /// Validation accuracy of the returned checkpoint.
    pub final_val_accuracy: f64,
    /// Optimizer step at which the returned checkpoint was taken.
    pub best_step: usize,
    /// (step, validation accuracy) for every checkpoint-phase evaluation.
    pub evaluations: Vec<(usize, f64)>,
    /// (step, mean batch loss) for every optimizer step.
    pub loss_curve: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub train_examples: usize,
    pub val_examples: usize,
    pub layers: BTreeMap<LayerIndex, LayerReport>,
}

/// Fraction of examples where argmax(logits) equals `y`; ties go to class 0.
pub fn evaluate_prober(
    prober: &ProberParams,
    examples: &[LabeledExample],
) -> Result<f64, TrainError> {
    if examples.is_empty() {
        return Err(TrainError::Data("no examples to evaluate".into()));
    }
    let mut correct = 0usize;
    for e in examples {
        let x = input(e, prober.layer)?;
        let logits = prober.forward(x, ForwardMode::Eval)?;
        let predicted = u8::from(logits[1] > logits[0]);
        correct += usize::from(predicted == e.y);
    }
    Ok(correct as f64 / examples.len() as f64)
}

fn input(e: &LabeledExample, layer: LayerIndex) -> Result<&[f64], TrainError> {
    e.pooled.get(&layer).map(Vec::as_slice).ok_or_else(|| {
        TrainError::Data(format!("example {:?} has no pooled vector for layer {layer}", e.question_id))
    })
}

fn layer_seed(seed: u64, layer: LayerIndex) -> u64 {
    let mut z = seed ^ u64::from(layer).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct AdamW {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl AdamW {
    fn new(params: &mut ProberParams) -> Self {
        let shapes: Vec<usize> = params.tensors_mut().iter().map(|t| t.len()).collect();
        Self {
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: &mut ProberParams, grads: &[Vec<f64>; 6], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let bias1 = 1.0 - cfg.beta1.powi(self.t);
        let bias2 = 1.0 - cfg.beta2.powi(self.t);
        for (k, tensor) in params.tensors_mut().into_iter().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads[k]);
            for i in 0..tensor.len() {
                tensor[i] -= lr * cfg.weight_decay * tensor[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                tensor[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
            }
        }
    }
}

fn d_model_for(layer: LayerIndex, sets: [&[LabeledExample]; 2]) -> Result<usize, TrainError> {
    let mut d = None;
    for e in sets.into_iter().flatten() {
        let len = input(e, layer)?.len();
        match d {
            None => d = Some(len),
            Some(d) if d != len => {
                return Err(TrainError::Data(format!(
                    "layer {layer}: pooled vectors of width {d} and {len}"
                )))
            }
            Some(_) => {}
        }
        if e.y > 1 {
            return Err(TrainError::Data(format!("label {} is not 0 or 1", e.y)));
        }
    }
    match d {
        Some(0) | None => Err(TrainError::Data(format!("layer {layer}: no usable inputs"))),
        Some(d) => Ok(d),
    }
}

fn train_layer(
    layer: LayerIndex,
    train: &[LabeledExample],
    val: &[LabeledExample],
    cfg: &TrainConfig,
) -> Result<(ProberParams, LayerReport), TrainError> {
    let d_model = d_model_for(layer, [train, val])?;
    let mut rng = ChaCha8Rng::seed_from_u64(layer_seed(cfg.seed, layer));
    let mut params = ProberParams::init_random(layer, d_model, cfg.hidden, cfg.dropout, &mut rng);
    let mut opt = AdamW::new(&mut params);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut step = 0usize;
    let mut loss_curve = Vec::new();
    let mut evaluations = Vec::new();
    let mut best: Option<(f64, usize, ProberParams)> = None;

    for epoch in 1..=cfg.epochs {
        // The first epoch is warm-up; checkpoints are only taken afterwards.
        let checkpointing = epoch >= 2;
        order.shuffle(&mut rng);
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        for (b, batch) in batches.iter().enumerate() {
            let mut grads = params.zero_gradients();
            let weight = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &i in batch.iter() {
                let mask = (cfg.dropout > 0.0).then(|| params.dropout_mask(&mut rng));
                loss += params.accumulate_gradients(
                    &train[i].pooled[&layer],
                    train[i].y,
                    mask.as_deref(),
                    weight,
                    &mut grads,
                )? * weight;
            }
            step += 1;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { layer, step });
            }
            let lr = cfg.learning_rate * cfg.scheduler_gamma.powi(step as i32 - 1);
            opt.step(&mut params, &grads.tensors, lr, cfg);
            loss_curve.push((step, loss));

            let epoch_end = b + 1 == batches.len();
            if checkpointing && (step.is_multiple_of(cfg.eval_every) || epoch_end) {
                let acc = evaluate_prober(&params, val)?;
                evaluations.push((step, acc));
                if best.as_ref().is_none_or(|(a, _, _)| acc > *a) {
                    best = Some((acc, step, params.clone()));
                }
            }
        }
    }

    let (final_val_accuracy, best_step, params) = match best {
        Some(b) => b,
        None => (evaluate_prober(&params, val)?, step, params),
    };
    Ok((params, LayerReport { final_val_accuracy, best_step, evaluations, loss_curve }))
}

/// Trains one independent prober per layer and returns them as an ensemble
/// with threshold 0.
pub fn train_probers(
    train: &[LabeledExample],
    val: &[LabeledExample],
    config: &TrainConfig,
    layers: &[LayerIndex],
) -> Result<(ProberEnsemble, TrainReport), TrainError> {
    config.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(TrainError::Data("training and validation sets must be nonempty".into()));
    }
    if layers.is_empty() {
        return Err(TrainError::Config("no layers to train".into()));
    }
    type LayerResult = Result<(ProberParams, LayerReport), TrainError>;
    let results: Vec<(LayerIndex, LayerResult)> = layers
        .par_iter()
        .map(|&l| (l, train_layer(l, train, val, config)))
        .collect();

    let mut probers = BTreeMap::new();
    let mut reports = BTreeMap::new();
    for (layer, r) in results {
        let (p, rep) = r?;
        probers.insert(layer, p);
        reports.insert(layer, rep);
    }
    let ensemble = ProberEnsemble::new(probers, 0.0)?;
    let report = TrainReport {
        config: config.clone(),
        train_examples: train.len(),
        val_examples: val.len(),
        layers: reports,
    };
    Ok((ensemble, report))
}
