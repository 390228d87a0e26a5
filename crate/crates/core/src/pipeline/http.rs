use std::time::Duration;

use super::protocol::{Generator, GeneratorError, GeneratorRequest, GeneratorResponse};

/// Blocking HTTP client for a generation server.
#[derive(Debug, Clone)]
pub struct HttpGenerator {
    endpoint: String,
    agent: ureq::Agent,
    retries: u32,
}

impl HttpGenerator {
    /// `endpoint` is the server base URL, e.g. `http://127.0.0.1:8000`.
    pub fn new(endpoint: impl Into<String>, timeout: Duration, retries: u32) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        Self { endpoint: endpoint.into().trim_end_matches('/').to_string(), agent, retries }
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn url(&self) -> String {
        format!("{}/generate", self.endpoint)
    }

    fn post_once(&self, body: &str) -> Result<String, GeneratorError> {
        match self
            .agent
            .post(&self.url())
            .set("Content-Type", "application/json")
            .send_string(body)
        {
            Ok(resp) => resp.into_string().map_err(|e| GeneratorError::Connection {
                endpoint: self.endpoint.clone(),
                reason: e.to_string(),
            }),
            Err(ureq::Error::Status(code, resp)) => {
                let reason = resp.into_string().unwrap_or_default();
                Err(GeneratorError::Protocol(format!("server returned {code}: {}", reason.trim())))
            }
            Err(ureq::Error::Transport(t)) => Err(GeneratorError::Connection {
                endpoint: self.endpoint.clone(),
                reason: t.to_string(),
            }),
        }
    }
}

impl Generator for HttpGenerator {
    fn generate(
        &self,
        request: &GeneratorRequest,
        _iteration: usize,
    ) -> Result<GeneratorResponse, GeneratorError> {
        let body = serde_json::to_string(request)
            .map_err(|e| GeneratorError::Protocol(e.to_string()))?;
        let mut attempt = 0;
        let text = loop {
            match self.post_once(&body) {
                Err(GeneratorError::Connection { .. }) if attempt < self.retries => {
                    attempt += 1;
                    log::warn!("generator at {} unreachable, retrying", self.endpoint);
                }
                other => break other?,
            }
        };
        serde_json::from_str(&text)
            .map_err(|e| GeneratorError::Protocol(format!("malformed response: {e}")))
    }
}
