//! Generator wire protocol.
//!
//! `POST /generate` with a JSON [`GeneratorRequest`] body; the server answers
//! with a JSON [`GeneratorResponse`] whose `hidden_states` maps each requested
//! layer to `u` rows of `d_model` reals, one row per generated rationale or
//! answer token.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probe::{HiddenTrace, LayerIndex};
use crate::retrieval::Document;

/// One few-shot exemplar shown before the question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShot {
    pub question: String,
    pub rationale: String,
    pub answer: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorRequest {
    pub question: String,
    pub passages: Vec<Document>,
    pub shots: Vec<FewShot>,
    pub layers: Vec<LayerIndex>,
    pub max_new_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorResponse {
    pub rationale: String,
    pub answer: String,
    pub hidden_states: HiddenTrace,
}

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("cannot reach generator at {endpoint}: {reason}")]
    Connection { endpoint: String, reason: String },
    #[error("generator protocol error: {0}")]
    Protocol(String),
    #[error("generator response is missing layer {0}")]
    MissingLayer(LayerIndex),
}

/// A source of generations with per-layer hidden states.
///
/// `iteration` counts retrieval steps taken so far for this question; remote
/// generators ignore it, scripted ones key their fixtures on it.
pub trait Generator: Send + Sync {
    fn generate(
        &self,
        request: &GeneratorRequest,
        iteration: usize,
    ) -> Result<GeneratorResponse, GeneratorError>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn generate(
        &self,
        request: &GeneratorRequest,
        iteration: usize,
    ) -> Result<GeneratorResponse, GeneratorError> {
        (**self).generate(request, iteration)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn generate(
        &self,
        request: &GeneratorRequest,
        iteration: usize,
    ) -> Result<GeneratorResponse, GeneratorError> {
        (**self).generate(request, iteration)
    }
}

impl GeneratorRequest {
    pub fn validate(&self) -> Result<(), GeneratorError> {
        if self.layers.is_empty() {
            return Err(GeneratorError::Protocol("request has no layers".into()));
        }
        if self.layers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GeneratorError::Protocol(
                "request layers must be strictly ascending".into(),
            ));
        }
        Ok(())
    }
}

impl GeneratorResponse {
    /// Checks the response against the request and drops unrequested layers.
    pub fn conform(self, request: &GeneratorRequest) -> Result<Self, GeneratorError> {
        let hidden_states = self
            .hidden_states
            .restrict_to(&request.layers)
            .map_err(GeneratorError::MissingLayer)?;
        Ok(Self { hidden_states, ..self })
    }
}

/// Sends `request` through `client` and validates the reply.
pub fn generate(
    client: &dyn Generator,
    request: &GeneratorRequest,
    iteration: usize,
) -> Result<GeneratorResponse, GeneratorError> {
    request.validate()?;
    client.generate(request, iteration)?.conform(request)
}
