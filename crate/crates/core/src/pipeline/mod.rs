//! The adaptive retrieve-and-generate loop.
//!
//! Each query starts with a generation that sees no passages. After every
//! generation the pooled hidden states go through the prober ensemble; a
//! "call" vote triggers a BM25 search whose top-`j` documents replace the
//! passages of the next generation. The loop stops at the first "pass" vote or
//! once `max_iterations` retrievals have been made.

mod http;
mod mock;
pub mod prompt;
mod protocol;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::HttpGenerator;
pub use mock::{MockEntry, MockGenerator, MockLoadError, SynthConfig};
pub use protocol::{
    generate, FewShot, Generator, GeneratorError, GeneratorRequest, GeneratorResponse,
};

use crate::probe::{LayerIndex, ProbeError, ProberEnsemble, RetrievalDecision, DEFAULT_LAYERS};
use crate::retrieval::{CorpusIndex, Document, DEFAULT_TOP_J};

pub const DEFAULT_MAX_ITERATIONS: usize = 5;
pub const DEFAULT_MAX_NEW_TOKENS: usize = 256;

/// One line of a questions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub answers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub max_iterations: usize,
    pub top_j: usize,
    pub theta: f64,
    pub layers: Vec<LayerIndex>,
    pub max_new_tokens: usize,
    pub shots: Vec<FewShot>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            max_iterations: DEFAULT_MAX_ITERATIONS,
            top_j: DEFAULT_TOP_J,
            theta: 0.0,
            layers: DEFAULT_LAYERS.to_vec(),
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            shots: prompt::default_shots(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Retrieval calls made before this generation.
    pub iteration: usize,
    pub rationale: String,
    pub answer: String,
    /// Ids of the passages shown to the generator.
    pub passages: Vec<String>,
    pub decision: RetrievalDecision,
    /// False when the vote asked for retrieval but the cap was reached.
    pub retrieval_triggered: bool,
    /// Ids returned by the search this iteration triggered.
    pub retrieved: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub question_id: String,
    pub question: String,
    pub iterations: Vec<IterationRecord>,
    pub final_answer: String,
    pub retrieval_calls: usize,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

#[derive(Debug, Error)]
#[error("iteration {iteration}: {source}")]
pub struct PipelineError {
    pub iteration: usize,
    #[source]
    pub source: StepError,
}

impl PipelineError {
    fn at(iteration: usize) -> impl FnOnce(StepError) -> Self {
        move |source| Self { iteration, source }
    }
}

#[derive(Debug, Error)]
#[error("question {question_id}: {error}")]
pub struct QueryFailure {
    pub question_id: String,
    pub error: PipelineError,
}

/// Builds the search query: the question, then (after the first retrieval) the
/// current passages' texts, then rationale and answer. Whitespace is collapsed.
pub fn form_retrieval_query(
    question: &str,
    docs: &[Document],
    rationale: &str,
    answer: &str,
    iteration: usize,
) -> String {
    let mut parts: Vec<&str> = vec![question];
    if iteration > 0 {
        parts.extend(docs.iter().map(|d| d.text.as_str()));
    }
    parts.push(rationale);
    parts.push(answer);
    parts
        .iter()
        .flat_map(|p| p.split_whitespace())
        .collect::<Vec<_>>()
        .join(" ")
}

fn step<T, E: Into<StepError>>(iteration: usize, r: Result<T, E>) -> Result<T, PipelineError> {
    r.map_err(|e| PipelineError::at(iteration)(e.into()))
}

/// Runs the loop for one question.
pub fn run_query(
    question_id: &str,
    question: &str,
    ensemble: &ProberEnsemble,
    index: &CorpusIndex,
    client: &dyn Generator,
    config: &PipelineConfig,
) -> Result<RunRecord, PipelineError> {
    let ensemble_layers = ensemble.layers();
    if let Some(&missing) = ensemble_layers.iter().find(|l| !config.layers.contains(l)) {
        return Err(PipelineError::at(0)(ProbeError::MissingLayer(missing).into()));
    }
    let mut request_layers = config.layers.clone();
    request_layers.sort_unstable();
    request_layers.dedup();

    let mut passages: Vec<Document> = Vec::new();
    let mut count = 0usize;
    let mut iterations = Vec::new();

    loop {
        let request = GeneratorRequest {
            question: question.to_string(),
            passages: passages.clone(),
            shots: config.shots.clone(),
            layers: request_layers.clone(),
            max_new_tokens: config.max_new_tokens,
        };
        let response = step(count, generate(client, &request, count))?;
        let pooled = step(count, response.hidden_states.pool(Some(&ensemble_layers)))?;
        let mut decision = step(count, ensemble.decide(&pooled))?;
        decision.theta = config.theta;
        decision.retrieve = decision.retrieve_at(config.theta);

        let mut record = IterationRecord {
            iteration: count,
            rationale: response.rationale,
            answer: response.answer,
            passages: passages.iter().map(|d| d.id.clone()).collect(),
            retrieval_triggered: false,
            retrieved: Vec::new(),
            decision,
        };

        if !record.decision.retrieve || count >= config.max_iterations {
            iterations.push(record);
            break;
        }

        let query =
            form_retrieval_query(question, &passages, &record.rationale, &record.answer, count);
        passages = index.search(&query, config.top_j).into_iter().map(|s| s.doc).collect();
        count += 1;
        record.retrieval_triggered = true;
        record.retrieved = passages.iter().map(|d| d.id.clone()).collect();
        iterations.push(record);
    }

    let final_answer = iterations.last().map(|i| i.answer.clone()).unwrap_or_default();
    Ok(RunRecord {
        question_id: question_id.to_string(),
        question: question.to_string(),
        iterations,
        final_answer,
        retrieval_calls: count,
    })
}

/// Runs every question, `parallelism` at a time. Output order follows input
/// order; a failing question does not stop the others.
pub fn run_batch(
    questions: &[Question],
    ensemble: &ProberEnsemble,
    index: &CorpusIndex,
    client: &dyn Generator,
    config: &PipelineConfig,
    parallelism: usize,
) -> Vec<Result<RunRecord, QueryFailure>> {
    let one = |q: &Question| {
        run_query(&q.id, &q.question, ensemble, index, client, config)
            .map_err(|error| QueryFailure { question_id: q.id.clone(), error })
    };
    if parallelism <= 1 || questions.len() <= 1 {
        return questions.iter().map(one).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(parallelism).build() {
        Ok(pool) => pool.install(|| questions.par_iter().map(one).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running sequentially");
            questions.iter().map(one).collect()
        }
    }
}

/// Retrieval-call histogram input for a batch: question id to call count.
pub fn retrieval_calls(records: &[RunRecord]) -> BTreeMap<String, usize> {
    records.iter().map(|r| (r.question_id.clone(), r.retrieval_calls)).collect()
}
