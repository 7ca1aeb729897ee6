//! Interfaces to the external model services the pipeline depends on
//! (chat completion, text embedding, token scoring), their remote HTTP
//! clients, and deterministic in-process stubs.

mod config;
mod ratelimit;
mod remote;
mod retry;
mod stats;
pub mod stub;

pub use config::{ProviderConfig, ProviderKind};
pub use ratelimit::{RateLimiter, RateLimits};
pub use remote::{HttpResponse, RemoteChat, RemoteEmbedder, RemoteScorer, Transport, UreqTransport};
pub use retry::{with_retry, RetryPolicy};
pub use stats::distribution_stats;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    Validation(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("rate limit still exceeded after {attempts} attempts")]
    RateLimitExhausted { attempts: u32 },
    #[error("transient failure ({status}): {message}")]
    Transient { status: u16, message: String },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("request failed ({status}): {message}")]
    Http { status: u16, message: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("embedding dimension mismatch at item {index}: expected {expected}, got {got}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("embedding for item {0} has zero norm")]
    ZeroVector(usize),
    #[error("text of {got} tokens exceeds the reference model context limit of {limit} tokens")]
    ContextLimit { limit: usize, got: usize },
    #[error("malformed provider response: {0}")]
    Malformed(String),
}

impl ProviderError {
    /// Whether a retry may succeed.
    pub fn is_transient(&self) -> bool {
        matches!(self, ProviderError::Transient { .. } | ProviderError::Transport(_))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub system_prompt: String,
    pub user_prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model_name: String,
}

impl ChatRequest {
    pub fn validate(&self, max_tokens_limit: u32) -> Result<(), ProviderError> {
        if self.system_prompt.trim().is_empty() || self.user_prompt.trim().is_empty() {
            return Err(ProviderError::Validation("prompts must be non-empty".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(ProviderError::Validation(format!(
                "temperature {} < 0",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(ProviderError::Validation("max_tokens must be positive".into()));
        }
        if self.max_tokens > max_tokens_limit {
            return Err(ProviderError::Validation(format!(
                "max_tokens {} exceeds provider limit {}",
                self.max_tokens, max_tokens_limit
            )));
        }
        if self.model_name.trim().is_empty() {
            return Err(ProviderError::Validation("model_name is empty".into()));
        }
        Ok(())
    }

    /// Rough token estimate used for rate limiting: prompt characters / 4
    /// plus the completion budget.
    pub fn estimated_tokens(&self) -> u32 {
        let chars = self.system_prompt.len() + self.user_prompt.len();
        (chars / 4) as u32 + self.max_tokens
    }
}

pub trait ChatProvider: Send + Sync {
    /// Largest `max_tokens` the provider accepts.
    fn max_tokens_limit(&self) -> u32;

    /// Performs the call without request validation.
    fn send(&self, request: &ChatRequest) -> Result<String, ProviderError>;

    /// Validates, dispatches and rejects empty completions.
    fn chat_complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        request.validate(self.max_tokens_limit())?;
        let text = self.send(request)?;
        if text.trim().is_empty() {
            return Err(ProviderError::EmptyCompletion);
        }
        Ok(text)
    }
}

/// A unit-norm embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct EmbeddingVector<T> {
    pub values: Vec<T>,
    pub model_name: String,
}

impl<T: Scalar> EmbeddingVector<T> {
    /// Normalizes `raw` to unit Euclidean length.
    pub fn normalized(raw: Vec<T>, model_name: impl Into<String>) -> Option<Self> {
        let norm = raw.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return None;
        }
        Some(Self {
            values: raw.into_iter().map(|v| v / norm).collect(),
            model_name: model_name.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt()
    }

    pub fn cast<U: Scalar>(&self) -> EmbeddingVector<U> {
        EmbeddingVector {
            values: self.values.iter().map(|v| U::of(v.to_f64_lossy())).collect(),
            model_name: self.model_name.clone(),
        }
    }
}

pub trait Embedder: Send + Sync {
    fn model_name(&self) -> &str;

    /// Raw (unnormalized) vectors, one per input, order-preserving.
    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError>;

    /// Embeds and unit-normalizes a batch.
    fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector<f64>>, ProviderError> {
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(ProviderError::Validation(format!("text {i} is empty")));
        }
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let raw = self.embed_raw(texts)?;
        if raw.len() != texts.len() {
            return Err(ProviderError::Malformed(format!(
                "{} vectors for {} inputs",
                raw.len(),
                texts.len()
            )));
        }
        let expected = raw[0].len();
        let mut out = Vec::with_capacity(raw.len());
        for (index, v) in raw.into_iter().enumerate() {
            if v.len() != expected {
                return Err(ProviderError::DimensionMismatch {
                    index,
                    expected,
                    got: v.len(),
                });
            }
            out.push(EmbeddingVector::normalized(v, self.model_name()).ok_or(ProviderError::ZeroVector(index))?);
        }
        Ok(out)
    }
}

/// Per-position statistics of the reference model's next-token distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TokenScore<T> {
    /// log p of the token that actually occurs.
    pub logprob_actual: T,
    /// Entropy of the full next-token distribution, in nats.
    pub entropy: T,
    /// Whether the actual token is among the `k` most probable tokens.
    pub in_top_k: bool,
    /// E[log p] under the next-token distribution.
    pub expected_logprob: T,
    /// Var[log p] under the next-token distribution.
    pub logprob_variance: T,
}

impl<T: Scalar> TokenScore<T> {
    pub fn cast<U: Scalar>(&self) -> TokenScore<U> {
        TokenScore {
            logprob_actual: U::of(self.logprob_actual.to_f64_lossy()),
            entropy: U::of(self.entropy.to_f64_lossy()),
            in_top_k: self.in_top_k,
            expected_logprob: U::of(self.expected_logprob.to_f64_lossy()),
            logprob_variance: U::of(self.logprob_variance.to_f64_lossy()),
        }
    }
}

pub trait TokenScorer: Send + Sync {
    /// Maximum number of tokens the reference model accepts.
    fn context_limit(&self) -> usize;

    fn score(&self, text: &str, top_k: usize) -> Result<Vec<TokenScore<f64>>, ProviderError>;

    fn score_tokens(&self, text: &str, top_k: usize) -> Result<Vec<TokenScore<f64>>, ProviderError> {
        if text.trim().is_empty() {
            return Err(ProviderError::Validation("cannot score empty text".into()));
        }
        if top_k == 0 {
            return Err(ProviderError::Validation("top_k must be at least 1".into()));
        }
        let scores = self.score(text, top_k)?;
        if scores.is_empty() {
            return Err(ProviderError::Malformed("scorer returned no tokens".into()));
        }
        Ok(scores)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(max_tokens: u32) -> ChatRequest {
        ChatRequest {
            system_prompt: "sys".into(),
            user_prompt: "user".into(),
            temperature: 1.0,
            max_tokens,
            model_name: "m".into(),
        }
    }

    #[test]
    fn request_validation() {
        req(3072).validate(4096).unwrap();
        assert!(matches!(req(5000).validate(4096), Err(ProviderError::Validation(_))));
        assert!(req(0).validate(4096).is_err());
        let mut r = req(10);
        r.user_prompt = "  ".into();
        assert!(r.validate(4096).is_err());
        r = req(10);
        r.temperature = -0.1;
        assert!(r.validate(4096).is_err());
    }

    #[test]
    fn normalization_and_zero_vector() {
        let v = EmbeddingVector::normalized(vec![3.0f64, 4.0], "m").unwrap();
        assert!((v.norm() - 1.0).abs() < 1e-12);
        assert_eq!(v.values, vec![0.6, 0.8]);
        assert!(EmbeddingVector::<f64>::normalized(vec![0.0, 0.0], "m").is_none());
    }

    struct Ragged;
    impl Embedder for Ragged {
        fn model_name(&self) -> &str {
            "ragged"
        }
        fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
            Ok(texts.iter().enumerate().map(|(i, _)| vec![1.0; 2 + i]).collect())
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let texts = vec!["a".to_string(), "b".to_string()];
        assert_eq!(
            Ragged.embed_batch(&texts).unwrap_err(),
            ProviderError::DimensionMismatch {
                index: 1,
                expected: 2,
                got: 3
            }
        );
        assert!(Ragged.embed_batch(&["".to_string()]).is_err());
    }
}
