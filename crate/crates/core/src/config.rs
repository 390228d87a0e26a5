//! `key = value` configuration shared by every subcommand.
//!
//! Blank lines and lines starting with `#` are ignored. Keys use snake_case
//! (`max_iterations`); the matching command-line flag is the kebab-case form
//! (`--max-iterations`). Values from flags always win over the file.

use std::path::{Path, PathBuf};
use std::{fmt, fs};

use thiserror::Error;

use crate::pipeline::{prompt, PipelineConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_MAX_NEW_TOKENS};
use crate::probe::{LayerIndex, DEFAULT_LAYERS};
use crate::retrieval::{DEFAULT_B, DEFAULT_K1, DEFAULT_TOP_J};
use crate::train::TrainConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("invalid value {value:?} for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
}

/// Every key with its default, as documented in `--help` and the README.
pub const KEYS: &[(&str, &str)] = &[
    ("corpus", "corpus JSONL (id, title, text); no default"),
    ("index", "BM25 index file; no default"),
    ("endpoint", "generator base URL, e.g. http://127.0.0.1:8000; no default"),
    ("mock_fixture", "mock generator fixture JSONL; overrides endpoint; no default"),
    ("mock_d_model", "width of synthesized mock hidden states (16)"),
    ("mock_tokens", "token rows of synthesized mock hidden states (4)"),
    ("layers", "comma-separated layer indices (6,8,10,12,14)"),
    ("theta", "decision threshold (the ensemble manifest's value)"),
    ("j", "passages per retrieval (5)"),
    ("max_iterations", "retrieval-call cap per question (5)"),
    ("max_new_tokens", "generation budget sent to the server (256)"),
    ("shots", "few-shot exemplar JSONL (built-in 4 exemplars)"),
    ("prompt_template", "prompt template text file (built-in layout)"),
    ("k1", "BM25 k1 (1.2)"),
    ("b", "BM25 b (0.75)"),
    ("learning_rate", "prober learning rate (0.001)"),
    ("batch", "prober batch size (12)"),
    ("epochs", "prober epochs, the first is warm-up (2)"),
    ("dropout", "prober dropout (0.1)"),
    ("gamma", "exponential lr decay per step (0.995)"),
    ("weight_decay", "AdamW decoupled weight decay (0.01)"),
    ("hidden", "prober hidden width (128)"),
    ("eval_every", "steps between validation checks (100)"),
    ("seed", "seed for training, balancing and mock synthesis (0)"),
    ("parallel", "concurrent questions in `run` and `sweep` (1)"),
    ("retries", "extra attempts on generator connection failure (1)"),
    ("timeout_secs", "generator request timeout in seconds (120)"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub corpus: Option<PathBuf>,
    pub index: Option<PathBuf>,
    pub endpoint: Option<String>,
    pub mock_fixture: Option<PathBuf>,
    pub mock_d_model: usize,
    pub mock_tokens: usize,
    pub layers: Vec<LayerIndex>,
    pub theta: Option<f64>,
    pub j: usize,
    pub max_iterations: usize,
    pub max_new_tokens: usize,
    pub shots: Option<PathBuf>,
    pub prompt_template: Option<PathBuf>,
    pub k1: f64,
    pub b: f64,
    pub train: TrainConfig,
    pub parallel: usize,
    pub retries: u32,
    pub timeout_secs: u64,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            index: None,
            endpoint: None,
            mock_fixture: None,
            mock_d_model: 16,
            mock_tokens: 4,
            layers: DEFAULT_LAYERS.to_vec(),
            theta: None,
            j: DEFAULT_TOP_J,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            shots: None,
            prompt_template: None,
            k1: DEFAULT_K1,
            b: DEFAULT_B,
            train: TrainConfig::default(),
            parallel: 1,
            retries: 1,
            timeout_secs: 120,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.into(),
        value: value.into(),
        reason: e.to_string(),
    })
}

fn positive(key: &str, value: &str) -> Result<usize, ConfigError> {
    let v: usize = parse(key, value)?;
    if v == 0 {
        return Err(ConfigError::Value {
            key: key.into(),
            value: value.into(),
            reason: "must be >= 1".into(),
        });
    }
    Ok(v)
}

pub fn parse_layers(value: &str) -> Result<Vec<LayerIndex>, ConfigError> {
    let err = |reason: &str| ConfigError::Value {
        key: "layers".into(),
        value: value.into(),
        reason: reason.into(),
    };
    let mut layers: Vec<LayerIndex> = value
        .split(',')
        .map(|s| s.trim().parse::<LayerIndex>().map_err(|e| err(&e.to_string())))
        .collect::<Result<_, _>>()?;
    if layers.contains(&0) {
        return Err(err("layer indices start at 1"));
    }
    layers.sort_unstable();
    let before = layers.len();
    layers.dedup();
    if layers.len() != before {
        return Err(err("duplicate layer"));
    }
    Ok(layers)
}

impl AppConfig {
    /// Sets one key. Accepts snake_case or kebab-case key spellings.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let k = key.as_str();
        match k {
            "corpus" => self.corpus = Some(value.into()),
            "index" => self.index = Some(value.into()),
            "endpoint" => self.endpoint = Some(value.into()),
            "mock_fixture" => self.mock_fixture = Some(value.into()),
            "mock_d_model" => self.mock_d_model = positive(k, value)?,
            "mock_tokens" => self.mock_tokens = positive(k, value)?,
            "layers" => self.layers = parse_layers(value)?,
            "theta" => self.theta = Some(parse(k, value)?),
            "j" => self.j = positive(k, value)?,
            "max_iterations" => self.max_iterations = positive(k, value)?,
            "max_new_tokens" => self.max_new_tokens = positive(k, value)?,
            "shots" => self.shots = Some(value.into()),
            "prompt_template" => self.prompt_template = Some(value.into()),
            "k1" => self.k1 = parse(k, value)?,
            "b" => self.b = parse(k, value)?,
            "learning_rate" => self.train.learning_rate = parse(k, value)?,
            "batch" => self.train.batch_size = positive(k, value)?,
            "epochs" => self.train.epochs = positive(k, value)?,
            "dropout" => self.train.dropout = parse(k, value)?,
            "gamma" => self.train.scheduler_gamma = parse(k, value)?,
            "weight_decay" => self.train.weight_decay = parse(k, value)?,
            "hidden" => self.train.hidden = positive(k, value)?,
            "eval_every" => self.train.eval_every = positive(k, value)?,
            "seed" => self.train.seed = parse(k, value)?,
            "parallel" => self.parallel = positive(k, value)?,
            "retries" => self.retries = parse(k, value)?,
            "timeout_secs" => self.timeout_secs = positive(k, value)? as u64,
            _ => return Err(ConfigError::UnknownKey(key)),
        }
        Ok(())
    }

    pub fn apply_str(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
            self.set(key, value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        self.apply_str(&text)
    }

    pub fn seed(&self) -> u64 {
        self.train.seed
    }

    /// Effective settings for the pipeline. `manifest_theta` fills in an
    /// unset `theta`.
    pub fn pipeline_config(&self, manifest_theta: f64) -> Result<PipelineConfig, ConfigError> {
        let shots = match &self.shots {
            Some(p) => prompt::load_shots(p).map_err(|e| ConfigError::Value {
                key: "shots".into(),
                value: p.display().to_string(),
                reason: e.to_string(),
            })?,
            None => prompt::default_shots(),
        };
        Ok(PipelineConfig {
            max_iterations: self.max_iterations,
            top_j: self.j,
            theta: self.theta.unwrap_or(manifest_theta),
            layers: self.layers.clone(),
            max_new_tokens: self.max_new_tokens,
            shots,
        })
    }

    pub fn prompt_template(&self) -> Result<String, ConfigError> {
        match &self.prompt_template {
            Some(p) => fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.display().to_string(),
                source,
            }),
            None => Ok(prompt::DEFAULT_TEMPLATE.to_string()),
        }
    }
}
