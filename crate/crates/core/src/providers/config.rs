use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::remote::{RemoteChat, RemoteEmbedder, RemoteScorer, UreqTransport};
use super::stub::{StubChat, StubEmbedder, StubScorer};
use super::{ChatProvider, Embedder, ProviderError, RateLimits, RetryPolicy, TokenScorer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Deterministic in-process implementation.
    Stub,
    /// OpenAI-compatible HTTP API (`/chat/completions`, `/embeddings`) and
    /// the `/score` token-scoring endpoint.
    Http,
}

fn default_rpm() -> u32 {
    60
}
fn default_tpm() -> u32 {
    1_000_000
}
fn default_timeout() -> u64 {
    120
}
fn default_retries() -> u32 {
    4
}
fn default_max_tokens_limit() -> u32 {
    8192
}
fn default_context_limit() -> usize {
    32_768
}
fn default_dimension() -> usize {
    256
}

/// Settings for one provider endpoint. Credentials are never stored here,
/// only the name of the environment variable holding them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    #[serde(default)]
    pub endpoint: Option<String>,
    pub model: String,
    #[serde(default)]
    pub api_key_env: Option<String>,
    #[serde(default = "default_rpm")]
    pub requests_per_minute: u32,
    #[serde(default = "default_tpm")]
    pub tokens_per_minute: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_max_tokens_limit")]
    pub max_tokens_limit: u32,
    #[serde(default = "default_context_limit")]
    pub context_limit: usize,
    /// Embedding width of the stub embedder.
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ProviderConfig {
    pub fn stub(model: impl Into<String>) -> Self {
        Self {
            kind: ProviderKind::Stub,
            endpoint: None,
            model: model.into(),
            api_key_env: None,
            requests_per_minute: default_rpm(),
            tokens_per_minute: default_tpm(),
            timeout_secs: default_timeout(),
            max_retries: default_retries(),
            max_tokens_limit: default_max_tokens_limit(),
            context_limit: default_context_limit(),
            dimension: default_dimension(),
            seed: 0,
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self, ProviderError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ProviderError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ProviderError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| ProviderError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::Config(m.to_string()));
        if self.model.trim().is_empty() {
            return bad("model is empty");
        }
        if self.requests_per_minute == 0 || self.tokens_per_minute == 0 {
            return bad("rate limits must be positive");
        }
        if self.kind == ProviderKind::Http && self.endpoint.as_deref().is_none_or(|e| e.trim().is_empty()) {
            return bad("http provider needs an endpoint");
        }
        if self.dimension == 0 {
            return bad("dimension must be positive");
        }
        Ok(())
    }

    pub fn rate_limits(&self) -> RateLimits {
        RateLimits {
            requests_per_minute: self.requests_per_minute,
            tokens_per_minute: self.tokens_per_minute,
        }
    }

    pub fn retry_policy(&self) -> RetryPolicy {
        RetryPolicy {
            max_retries: self.max_retries,
            ..RetryPolicy::default()
        }
    }

    /// Reads the credential from the configured environment variable.
    pub fn api_key(&self) -> Result<Option<String>, ProviderError> {
        match &self.api_key_env {
            None => Ok(None),
            Some(var) => std::env::var(var)
                .map(Some)
                .map_err(|_| ProviderError::Auth(format!("environment variable {var} is not set"))),
        }
    }

    fn transport(&self) -> Arc<UreqTransport> {
        Arc::new(UreqTransport::new(Duration::from_secs(self.timeout_secs)))
    }

    fn endpoint(&self) -> String {
        self.endpoint.clone().unwrap_or_default()
    }

    pub fn chat_provider(&self) -> Result<Arc<dyn ChatProvider>, ProviderError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::Stub => Arc::new(StubChat::new(self.seed).with_max_tokens_limit(self.max_tokens_limit)),
            ProviderKind::Http => Arc::new(RemoteChat::new(
                self.endpoint(),
                self.api_key()?,
                self.transport(),
                self,
            )),
        })
    }

    pub fn embedder(&self) -> Result<Arc<dyn Embedder>, ProviderError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::Stub => Arc::new(StubEmbedder::new(self.model.clone(), self.dimension, self.seed)),
            ProviderKind::Http => Arc::new(RemoteEmbedder::new(
                self.endpoint(),
                self.api_key()?,
                self.transport(),
                self,
            )),
        })
    }

    pub fn scorer(&self) -> Result<Arc<dyn TokenScorer>, ProviderError> {
        self.validate()?;
        Ok(match self.kind {
            ProviderKind::Stub => Arc::new(StubScorer::new().with_context_limit(self.context_limit)),
            ProviderKind::Http => Arc::new(RemoteScorer::new(
                self.endpoint(),
                self.api_key()?,
                self.transport(),
                self,
            )),
        })
    }
}
