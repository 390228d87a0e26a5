//! Adaptive retrieval-augmented generation driven by hidden-state probers.
//!
//! A small feed-forward prober reads the pooled hidden states of a few
//! intermediate layers of the generating model and votes on whether another
//! retrieval step is needed before the answer is accepted. The crate contains
//! everything around that decision:
//!
//! - [`probe`]: pooling, the prober network, ensemble voting and checkpoints.
//! - [`retrieval`]: Okapi BM25 over a JSONL corpus.
//! - [`pipeline`]: the generate / probe / retrieve loop, the generator wire
//!   protocol, an HTTP client and a deterministic mock generator.
//! - [`train`]: labelled dataset construction and per-layer prober training.
//! - [`eval`]: EM / ACC metrics, consistency and retrieval-step statistics.
//! - [`sweep`]: threshold and layer-subset sweeps over a question set.
//! - [`config`] and [`cli`]: the `probe-rag` command-line front-end.

pub mod cli;
pub mod config;
pub mod eval;
pub mod jsonl;
pub mod pipeline;
pub mod probe;
pub mod retrieval;
pub mod sweep;
pub mod train;

pub use pipeline::{run_batch, run_query, Generator, PipelineConfig, RunRecord};
pub use probe::{
    pool_hidden_states, HiddenTrace, LayerIndex, ProberEnsemble, ProberParams, RetrievalDecision,
};
pub use retrieval::{CorpusIndex, Document, ScoredDocument};
