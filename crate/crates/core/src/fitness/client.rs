//! HTTP client for the embedding service.
//!
//! Wire contract (JSON, UTF-8):
//!
//! ```text
//! POST /embed_image  {"png_base64": "..."} -> 200 {"embedding": [..], "dim": D}
//! POST /embed_text   {"text": "..."}       -> 200 {"embedding": [..], "dim": D}
//! GET  /health                             -> 200 {"model": "...", "dim": D}
//! ```
//!
//! 400 signals a malformed request, 500 a model failure and 503 a saturated
//! server. Only transport failures and 503 are retried.

use std::time::Duration;

use base64::Engine;
use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{EmbeddingVector, FitnessError};
use crate::render::Film;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub retries: u32,
    /// Delay before the first retry; doubles on each further retry.
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            retries: 3,
            base_delay: Duration::from_millis(200),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthInfo {
    pub model: String,
    pub dim: usize,
}

#[derive(Deserialize)]
struct EmbeddingResponse {
    embedding: Vec<f64>,
    dim: usize,
}

#[derive(Serialize)]
struct ImageRequest<'a> {
    png_base64: &'a str,
}

#[derive(Serialize)]
struct TextRequest<'a> {
    text: &'a str,
}

#[derive(Debug, Clone)]
pub struct EmbeddingClient {
    base_url: String,
    agent: Agent,
    retry: RetryPolicy,
    dim: Option<usize>,
}

enum Attempt<T> {
    Done(T),
    Transient(String),
}

impl EmbeddingClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        EmbeddingClient::with_retry(base_url, RetryPolicy::default())
    }

    pub fn with_retry(base_url: impl Into<String>, retry: RetryPolicy) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        EmbeddingClient {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            agent,
            retry,
            dim: None,
        }
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Dimension announced by `/health`, once [`EmbeddingClient::connect`] ran.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Queries `/health` and pins the embedding dimension for later checks.
    pub fn connect(&mut self) -> Result<HealthInfo, FitnessError> {
        let info = self.health()?;
        if info.dim == 0 {
            return Err(FitnessError::Protocol("service announced dim 0".into()));
        }
        self.dim = Some(info.dim);
        Ok(info)
    }

    pub fn health(&self) -> Result<HealthInfo, FitnessError> {
        let url = format!("{}/health", self.base_url);
        self.with_retries(&url, || {
            let resp = self.agent.get(&url).call();
            Self::read(resp)
        })
    }

    pub fn embed_image(&self, film: &Film) -> Result<EmbeddingVector, FitnessError> {
        let png = base64::engine::general_purpose::STANDARD.encode(film.to_png_bytes());
        let url = format!("{}/embed_image", self.base_url);
        let body = ImageRequest { png_base64: &png };
        let resp: EmbeddingResponse =
            self.with_retries(&url, || Self::read(self.agent.post(&url).send_json(&body)))?;
        self.check(resp)
    }

    pub fn embed_text(&self, prompt: &str) -> Result<EmbeddingVector, FitnessError> {
        if prompt.is_empty() {
            return Err(FitnessError::EmptyPrompt);
        }
        let url = format!("{}/embed_text", self.base_url);
        let body = TextRequest { text: prompt };
        let resp: EmbeddingResponse =
            self.with_retries(&url, || Self::read(self.agent.post(&url).send_json(&body)))?;
        self.check(resp)
    }

    fn check(&self, resp: EmbeddingResponse) -> Result<EmbeddingVector, FitnessError> {
        if resp.embedding.len() != resp.dim {
            return Err(FitnessError::Protocol(format!(
                "embedding has {} values but dim is {}",
                resp.embedding.len(),
                resp.dim
            )));
        }
        if let Some(expected) = self.dim {
            if resp.dim != expected {
                return Err(FitnessError::Protocol(format!(
                    "service announced dim {expected} but returned {}",
                    resp.dim
                )));
            }
        }
        EmbeddingVector::new(resp.embedding)
            .map_err(|e| FitnessError::Protocol(format!("invalid embedding: {e}")))
    }

    fn read<T: serde::de::DeserializeOwned>(
        resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>,
    ) -> Result<Attempt<T>, FitnessError> {
        let mut resp = match resp {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Transient(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status == 503 {
            return Ok(Attempt::Transient("service saturated (503)".into()));
        }
        if status != 200 {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(FitnessError::Service { status, body });
        }
        resp.body_mut()
            .read_json::<T>()
            .map(Attempt::Done)
            .map_err(|e| FitnessError::Protocol(format!("malformed response: {e}")))
    }

    fn with_retries<T>(
        &self,
        url: &str,
        mut call: impl FnMut() -> Result<Attempt<T>, FitnessError>,
    ) -> Result<T, FitnessError> {
        let mut delay = self.retry.base_delay;
        let mut last = String::new();
        for attempt in 0..=self.retry.retries {
            if attempt > 0 {
                log::warn!("{url}: {last}; retry {attempt} in {delay:?}");
                std::thread::sleep(delay);
                delay *= 2;
            }
            match call()? {
                Attempt::Done(v) => return Ok(v),
                Attempt::Transient(msg) => last = msg,
            }
        }
        Err(FitnessError::Unreachable {
            url: url.to_string(),
            attempts: self.retry.retries + 1,
            message: last,
        })
    }
}
