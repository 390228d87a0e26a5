use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{LayerIndex, ProbeError};

/// Weights of one prober: learned elementwise affine on the (already
/// standardized) input, then `Linear -> SiLU -> Dropout -> Linear` with two
/// output logits: index 0 calls retrieval, index 1 passes.
///
/// Matrices are row-major: `w1` is `d_model x hidden`, `w2` is `hidden x 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProberParams {
    pub layer: LayerIndex,
    pub dropout_rate: f64,
    pub norm_gain: Vec<f64>,
    pub norm_bias: Vec<f64>,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForwardMode {
    /// Dropout disabled; deterministic.
    Eval,
    /// Inverted dropout with a mask drawn from the given seed.
    Train { seed: Option<u64> },
}

/// Intermediate values kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct ForwardCache {
    pub normed: Vec<f64>,
    pub pre_act: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: [f64; 2],
}

/// Gradients laid out like [`ProberParams::tensors_mut`].
#[derive(Debug, Clone)]
pub(crate) struct Gradients {
    pub tensors: [Vec<f64>; 6],
}

pub(crate) fn silu(z: f64) -> f64 {
    z / (1.0 + (-z).exp())
}

fn silu_grad(z: f64) -> f64 {
    let s = 1.0 / (1.0 + (-z).exp());
    s * (1.0 + z * (1.0 - s))
}

impl ProberParams {
    pub fn zeros(layer: LayerIndex, d_model: usize, hidden: usize, dropout_rate: f64) -> Self {
        Self {
            layer,
            dropout_rate,
            norm_gain: vec![0.0; d_model],
            norm_bias: vec![0.0; d_model],
            w1: vec![0.0; d_model * hidden],
            b1: vec![0.0; hidden],
            w2: vec![0.0; hidden * 2],
            b2: [0.0; 2],
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) linear layers, identity affine.
    pub fn init_random(
        layer: LayerIndex,
        d_model: usize,
        hidden: usize,
        dropout_rate: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let mut p = Self::zeros(layer, d_model, hidden, dropout_rate);
        p.norm_gain.iter_mut().for_each(|g| *g = 1.0);
        let bound1 = 1.0 / (d_model as f64).sqrt();
        p.w1.iter_mut().for_each(|w| *w = rng.gen_range(-bound1..bound1));
        p.b1.iter_mut().for_each(|w| *w = rng.gen_range(-bound1..bound1));
        let bound2 = 1.0 / (hidden as f64).sqrt();
        p.w2.iter_mut().for_each(|w| *w = rng.gen_range(-bound2..bound2));
        p.b2.iter_mut().for_each(|w| *w = rng.gen_range(-bound2..bound2));
        p
    }

    pub fn d_model(&self) -> usize {
        self.norm_gain.len()
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    pub fn parameter_count(&self) -> usize {
        self.norm_gain.len() + self.norm_bias.len() + self.w1.len() + self.b1.len() + self.w2.len() + 2
    }

    pub fn validate(&self) -> Result<(), ProbeError> {
        let d = self.d_model();
        let h = self.hidden();
        let bad = |what: &str| Err(ProbeError::InvalidParams(what.to_string()));
        if d == 0 || h == 0 {
            return bad("d_model and hidden must be positive");
        }
        if self.norm_bias.len() != d {
            return bad("norm_bias length differs from d_model");
        }
        if self.w1.len() != d * h {
            return bad("w1 is not d_model x hidden");
        }
        if self.w2.len() != h * 2 {
            return bad("w2 is not hidden x 2");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must be in [0, 1)");
        }
        Ok(())
    }

    /// Computes the two logits for `x`.
    pub fn forward(&self, x: &[f64], mode: ForwardMode) -> Result<[f64; 2], ProbeError> {
        let mask = match mode {
            ForwardMode::Eval => None,
            ForwardMode::Train { .. } if self.dropout_rate == 0.0 => None,
            ForwardMode::Train { seed: None } => return Err(ProbeError::MissingSeed),
            ForwardMode::Train { seed: Some(seed) } => {
                Some(self.dropout_mask(&mut ChaCha8Rng::seed_from_u64(seed)))
            }
        };
        Ok(self.forward_cached(x, mask.as_deref())?.logits)
    }

    /// Inverted-dropout mask: 0 for dropped units, `1 / (1 - p)` for kept ones.
    pub(crate) fn dropout_mask(&self, rng: &mut impl Rng) -> Vec<f64> {
        let keep_scale = 1.0 / (1.0 - self.dropout_rate);
        (0..self.hidden())
            .map(|_| {
                if rng.gen::<f64>() < self.dropout_rate {
                    0.0
                } else {
                    keep_scale
                }
            })
            .collect()
    }

    pub(crate) fn forward_cached(
        &self,
        x: &[f64],
        mask: Option<&[f64]>,
    ) -> Result<ForwardCache, ProbeError> {
        let d = self.d_model();
        let h = self.hidden();
        if x.len() != d {
            return Err(ProbeError::Dimension(format!(
                "prober for layer {} expects {d} inputs, got {}",
                self.layer,
                x.len()
            )));
        }
        let normed: Vec<f64> = x
            .iter()
            .zip(&self.norm_gain)
            .zip(&self.norm_bias)
            .map(|((v, g), b)| v * g + b)
            .collect();

        let mut pre_act = self.b1.clone();
        for (i, a) in normed.iter().enumerate() {
            let row = &self.w1[i * h..(i + 1) * h];
            for (z, w) in pre_act.iter_mut().zip(row) {
                *z += a * w;
            }
        }
        let mut hidden: Vec<f64> = pre_act.iter().map(|&z| silu(z)).collect();
        if let Some(mask) = mask {
            hidden.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
        }

        let mut logits = self.b2;
        for (k, v) in hidden.iter().enumerate() {
            logits[0] += v * self.w2[2 * k];
            logits[1] += v * self.w2[2 * k + 1];
        }
        Ok(ForwardCache { normed, pre_act, hidden, logits })
    }

    /// Softmax cross-entropy of one example and its parameter gradients,
    /// accumulated (scaled by `weight`) into `grads`.
    pub(crate) fn accumulate_gradients(
        &self,
        x: &[f64],
        label: u8,
        mask: Option<&[f64]>,
        weight: f64,
        grads: &mut Gradients,
    ) -> Result<f64, ProbeError> {
        let cache = self.forward_cached(x, mask)?;
        let h = self.hidden();
        let [o0, o1] = cache.logits;
        let max = o0.max(o1);
        let lse = max + ((o0 - max).exp() + (o1 - max).exp()).ln();
        let y = usize::from(label);
        let loss = lse - cache.logits[y];
        let p = [(o0 - lse).exp(), (o1 - lse).exp()];
        let d_logits = [
            (p[0] - if y == 0 { 1.0 } else { 0.0 }) * weight,
            (p[1] - if y == 1 { 1.0 } else { 0.0 }) * weight,
        ];

        let [g_gain, g_bias, g_w1, g_b1, g_w2, g_b2] = &mut grads.tensors;
        g_b2[0] += d_logits[0];
        g_b2[1] += d_logits[1];

        let mut d_pre = vec![0.0; h];
        for k in 0..h {
            g_w2[2 * k] += cache.hidden[k] * d_logits[0];
            g_w2[2 * k + 1] += cache.hidden[k] * d_logits[1];
            let mut d_hidden = self.w2[2 * k] * d_logits[0] + self.w2[2 * k + 1] * d_logits[1];
            if let Some(mask) = mask {
                d_hidden *= mask[k];
            }
            d_pre[k] = d_hidden * silu_grad(cache.pre_act[k]);
            g_b1[k] += d_pre[k];
        }

        for (i, &a) in cache.normed.iter().enumerate() {
            let w_row = &self.w1[i * h..(i + 1) * h];
            let g_row = &mut g_w1[i * h..(i + 1) * h];
            let mut d_norm = 0.0;
            for k in 0..h {
                g_row[k] += a * d_pre[k];
                d_norm += w_row[k] * d_pre[k];
            }
            g_gain[i] += d_norm * x[i];
            g_bias[i] += d_norm;
        }
        Ok(loss)
    }

    /// Cross-entropy of one example and its gradient, shaped like `self`.
    /// `dropout_mask` holds one multiplier per hidden unit.
    pub fn loss_and_gradient(
        &self,
        x: &[f64],
        label: u8,
        dropout_mask: Option<&[f64]>,
    ) -> Result<(f64, ProberParams), ProbeError> {
        if label > 1 {
            return Err(ProbeError::InvalidParams(format!("label {label} is not 0 or 1")));
        }
        if dropout_mask.is_some_and(|m| m.len() != self.hidden()) {
            return Err(ProbeError::Dimension("dropout mask length differs from hidden width".into()));
        }
        let mut grads = self.zero_gradients();
        let loss = self.accumulate_gradients(x, label, dropout_mask, 1.0, &mut grads)?;
        let [gain, bias, w1, b1, w2, b2] = grads.tensors;
        let grad = ProberParams {
            layer: self.layer,
            dropout_rate: self.dropout_rate,
            norm_gain: gain,
            norm_bias: bias,
            w1,
            b1,
            w2,
            b2: [b2[0], b2[1]],
        };
        Ok((loss, grad))
    }

    /// Parameter tensors in a fixed order: gain, bias, w1, b1, w2, b2.
    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 6] {
        [
            &mut self.norm_gain,
            &mut self.norm_bias,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
        ]
    }

    pub(crate) fn zero_gradients(&self) -> Gradients {
        Gradients {
            tensors: [
                vec![0.0; self.norm_gain.len()],
                vec![0.0; self.norm_bias.len()],
                vec![0.0; self.w1.len()],
                vec![0.0; self.b1.len()],
                vec![0.0; self.w2.len()],
                vec![0.0; 2],
            ],
        }
    }
}
