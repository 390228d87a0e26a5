//! Scripted generator for tests and offline experiments.
//!
//! Fixture file: JSONL, one [`MockEntry`] per line, keyed by
//! `(question, iteration)`. A request at iteration `k` uses the entry with the
//! largest scripted iteration `<= k`, so a single iteration-0 line scripts every
//! iteration of that question. Entries without `hidden_states` get vectors
//! synthesized from a seeded hash of (question, iteration, layer, token, dim).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::protocol::{Generator, GeneratorError, GeneratorRequest, GeneratorResponse};
use crate::jsonl::{self, JsonlError};
use crate::probe::{HiddenTrace, LayerIndex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub question: String,
    #[serde(default)]
    pub iteration: usize,
    pub rationale: String,
    pub answer: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_states: Option<HiddenTrace>,
    /// Token count for synthesized hidden states.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub d_model: usize,
    pub tokens: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { d_model: 16, tokens: 4, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct MockGenerator {
    entries: HashMap<String, BTreeMap<usize, MockEntry>>,
    synth: SynthConfig,
}

impl MockGenerator {
    pub fn new(entries: Vec<MockEntry>, synth: SynthConfig) -> Result<Self, GeneratorError> {
        let mut map: HashMap<String, BTreeMap<usize, MockEntry>> = HashMap::new();
        for e in entries {
            let slot = map.entry(e.question.clone()).or_default();
            if slot.contains_key(&e.iteration) {
                return Err(GeneratorError::Protocol(format!(
                    "fixture scripts ({:?}, {}) twice",
                    e.question, e.iteration
                )));
            }
            slot.insert(e.iteration, e);
        }
        Ok(Self { entries: map, synth })
    }

    pub fn from_file(path: &Path, synth: SynthConfig) -> Result<Self, MockLoadError> {
        let entries = jsonl::read(path)?;
        Ok(Self::new(entries, synth)?)
    }

    fn lookup(&self, question: &str, iteration: usize) -> Option<&MockEntry> {
        self.entries.get(question)?.range(..=iteration).next_back().map(|(_, e)| e)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MockLoadError {
    #[error(transparent)]
    File(#[from] JsonlError),
    #[error(transparent)]
    Fixture(#[from] GeneratorError),
}

impl Generator for MockGenerator {
    fn generate(
        &self,
        request: &GeneratorRequest,
        iteration: usize,
    ) -> Result<GeneratorResponse, GeneratorError> {
        let entry = self.lookup(&request.question, iteration).ok_or_else(|| {
            GeneratorError::Protocol(format!(
                "mock fixture has no entry for question {:?}",
                request.question
            ))
        })?;
        let hidden_states = match &entry.hidden_states {
            Some(h) => h.clone(),
            None => synthesize(
                &self.synth,
                &request.question,
                entry.iteration,
                &request.layers,
                entry.tokens.unwrap_or(self.synth.tokens),
            )?,
        };
        Ok(GeneratorResponse {
            rationale: entry.rationale.clone(),
            answer: entry.answer.clone(),
            hidden_states,
        })
    }
}

fn synthesize(
    cfg: &SynthConfig,
    question: &str,
    iteration: usize,
    layers: &[LayerIndex],
    tokens: usize,
) -> Result<HiddenTrace, GeneratorError> {
    let mut out = BTreeMap::new();
    for &layer in layers {
        let rows = (0..tokens)
            .map(|t| {
                (0..cfg.d_model)
                    .map(|d| hash_unit(cfg.seed, question, iteration, layer, t, d))
                    .collect()
            })
            .collect();
        out.insert(layer, rows);
    }
    HiddenTrace::new(out).map_err(|e| GeneratorError::Protocol(e.to_string()))
}

/// Deterministic value in [-1, 1) independent of platform and std hasher.
fn hash_unit(
    seed: u64,
    question: &str,
    iteration: usize,
    layer: LayerIndex,
    token: usize,
    dim: usize,
) -> f64 {
    const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = FNV_OFFSET;
    let mut feed = |bytes: &[u8]| {
        for &b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    };
    feed(&seed.to_le_bytes());
    feed(question.as_bytes());
    feed(&[0xff]);
    feed(&(iteration as u64).to_le_bytes());
    feed(&u64::from(layer).to_le_bytes());
    feed(&(token as u64).to_le_bytes());
    feed(&(dim as u64).to_le_bytes());
    // splitmix64 finalizer
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
}
