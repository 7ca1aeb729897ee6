//! HTTP clients for OpenAI-compatible chat and embedding APIs and for the
//! token-scoring endpoint.
//!
//! The scoring endpoint is `POST {endpoint}/score` with body
//! `{"model", "text", "top_k"}` and answers
//! `{"tokens": [{"logprob_actual", "entropy", "in_top_k", "expected_logprob",
//! "logprob_variance"}, ...]}`. A context overflow is reported as HTTP 413
//! with `{"context_limit": n, "tokens": m}`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use super::{
    with_retry, ChatProvider, ChatRequest, Embedder, ProviderConfig, ProviderError, RateLimiter, RetryPolicy,
    TokenScore, TokenScorer,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: String,
}

/// Minimal blocking JSON POST. Non-2xx statuses are returned, not raised.
pub trait Transport: Send + Sync {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<HttpResponse, ProviderError>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl Transport for UreqTransport {
    fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<HttpResponse, ProviderError> {
        let mut req = self.agent.post(url).header("Content-Type", "application/json");
        if let Some(key) = bearer {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        Ok(HttpResponse { status, body })
    }
}

fn check_status(resp: &HttpResponse) -> Result<(), ProviderError> {
    let message = || resp.body.chars().take(300).collect::<String>();
    match resp.status {
        200..=299 => Ok(()),
        401 | 403 => Err(ProviderError::Auth(message())),
        408 | 429 | 500..=599 => Err(ProviderError::Transient {
            status: resp.status,
            message: message(),
        }),
        status => Err(ProviderError::Http {
            status,
            message: message(),
        }),
    }
}

fn parse_json(body: &str) -> Result<Value, ProviderError> {
    serde_json::from_str(body).map_err(|e| ProviderError::Malformed(e.to_string()))
}

/// Shared plumbing: endpoint, credentials, rate limiting and retries.
struct Client {
    endpoint: String,
    api_key: Option<String>,
    transport: Arc<dyn Transport>,
    limiter: RateLimiter,
    retry: RetryPolicy,
    model: String,
    attempts: AtomicU64,
}

impl Client {
    fn new(endpoint: String, api_key: Option<String>, transport: Arc<dyn Transport>, cfg: &ProviderConfig) -> Self {
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            api_key,
            transport,
            limiter: RateLimiter::new(cfg.rate_limits()),
            retry: cfg.retry_policy(),
            model: cfg.model.clone(),
            attempts: AtomicU64::new(0),
        }
    }

    fn call(&self, path: &str, body: &Value, tokens: u32) -> Result<(Value, u32), ProviderError> {
        let url = format!("{}/{}", self.endpoint, path);
        with_retry(&self.retry, |_| {
            self.limiter.acquire(tokens);
            self.attempts.fetch_add(1, Ordering::Relaxed);
            let resp = self.transport.post_json(&url, self.api_key.as_deref(), body)?;
            if resp.status == 413 {
                let v = parse_json(&resp.body).unwrap_or(Value::Null);
                return Err(ProviderError::ContextLimit {
                    limit: v["context_limit"].as_u64().unwrap_or(0) as usize,
                    got: v["tokens"].as_u64().unwrap_or(0) as usize,
                });
            }
            check_status(&resp)?;
            parse_json(&resp.body)
        })
    }
}

pub struct RemoteChat {
    client: Client,
    max_tokens_limit: u32,
}

impl RemoteChat {
    pub fn new(endpoint: String, api_key: Option<String>, transport: Arc<dyn Transport>, cfg: &ProviderConfig) -> Self {
        Self {
            client: Client::new(endpoint, api_key, transport, cfg),
            max_tokens_limit: cfg.max_tokens_limit,
        }
    }

    pub fn with_retry_policy(mut self, policy: RetryPolicy) -> Self {
        self.client.retry = policy;
        self
    }

    /// HTTP attempts made so far, retries included.
    pub fn total_attempts(&self) -> u64 {
        self.client.attempts.load(Ordering::Relaxed)
    }
}

impl ChatProvider for RemoteChat {
    fn max_tokens_limit(&self) -> u32 {
        self.max_tokens_limit
    }

    fn send(&self, req: &ChatRequest) -> Result<String, ProviderError> {
        let body = json!({
            "model": req.model_name,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        });
        let (v, attempts) = self.client.call("chat/completions", &body, req.estimated_tokens())?;
        log::trace!("chat completion after {attempts} attempt(s)");
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Malformed("missing choices[0].message.content".into()))
    }
}

pub struct RemoteEmbedder {
    client: Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: String, api_key: Option<String>, transport: Arc<dyn Transport>, cfg: &ProviderConfig) -> Self {
        Self {
            client: Client::new(endpoint, api_key, transport, cfg),
        }
    }
}

impl Embedder for RemoteEmbedder {
    fn model_name(&self) -> &str {
        &self.client.model
    }

    fn embed_raw(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ProviderError> {
        let body = json!({"model": self.client.model, "input": texts});
        let tokens = texts.iter().map(|t| t.len() / 4 + 1).sum::<usize>() as u32;
        let (v, _) = self.client.call("embeddings", &body, tokens)?;
        let data = v["data"]
            .as_array()
            .ok_or_else(|| ProviderError::Malformed("missing data array".into()))?;
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::with_capacity(data.len());
        for (pos, item) in data.iter().enumerate() {
            let index = item["index"].as_u64().map(|i| i as usize).unwrap_or(pos);
            let emb = item["embedding"]
                .as_array()
                .ok_or_else(|| ProviderError::Malformed(format!("item {pos} has no embedding")))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| ProviderError::Malformed("non-numeric embedding".into()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push((index, emb));
        }
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

pub struct RemoteScorer {
    client: Client,
    context_limit: usize,
}

impl RemoteScorer {
    pub fn new(endpoint: String, api_key: Option<String>, transport: Arc<dyn Transport>, cfg: &ProviderConfig) -> Self {
        Self {
            client: Client::new(endpoint, api_key, transport, cfg),
            context_limit: cfg.context_limit,
        }
    }
}

impl TokenScorer for RemoteScorer {
    fn context_limit(&self) -> usize {
        self.context_limit
    }

    fn score(&self, text: &str, top_k: usize) -> Result<Vec<TokenScore<f64>>, ProviderError> {
        let body = json!({"model": self.client.model, "text": text, "top_k": top_k});
        let (v, _) = self.client.call("score", &body, (text.len() / 4 + 1) as u32)?;
        serde_json::from_value(v["tokens"].clone()).map_err(|e| ProviderError::Malformed(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use parking_lot::Mutex;
    use std::collections::VecDeque;

    /// Replays canned responses and records request URLs.
    struct FakeTransport {
        replies: Mutex<VecDeque<HttpResponse>>,
        seen: Mutex<Vec<(String, Option<String>, Value)>>,
    }

    impl FakeTransport {
        fn new(replies: Vec<(u16, &str)>) -> Arc<Self> {
            Arc::new(Self {
                replies: Mutex::new(
                    replies
                        .into_iter()
                        .map(|(status, body)| HttpResponse {
                            status,
                            body: body.to_string(),
                        })
                        .collect(),
                ),
                seen: Mutex::new(Vec::new()),
            })
        }
    }

    impl Transport for FakeTransport {
        fn post_json(&self, url: &str, bearer: Option<&str>, body: &Value) -> Result<HttpResponse, ProviderError> {
            self.seen
                .lock()
                .push((url.to_string(), bearer.map(str::to_string), body.clone()));
            self.replies
                .lock()
                .pop_front()
                .ok_or_else(|| ProviderError::Transport("no reply queued".into()))
        }
    }

    fn cfg() -> ProviderConfig {
        let mut c = ProviderConfig::stub("gpt-test");
        c.kind = super::super::ProviderKind::Http;
        c.endpoint = Some("http://localhost:1/v1/".into());
        c
    }

    fn request() -> ChatRequest {
        ChatRequest {
            system_prompt: "s".into(),
            user_prompt: "u".into(),
            temperature: 1.0,
            max_tokens: 16,
            model_name: "gpt-test".into(),
        }
    }

    const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"hello"}}]}"#;

    #[test]
    fn transient_5xx_twice_then_success() {
        let t = FakeTransport::new(vec![(503, "busy"), (502, "bad gateway"), (200, OK)]);
        let chat = RemoteChat::new("http://h/v1".into(), Some("k".into()), t.clone(), &cfg())
            .with_retry_policy(RetryPolicy::no_delay(4));
        assert_eq!(chat.chat_complete(&request()).unwrap(), "hello");
        assert_eq!(chat.total_attempts(), 3);
        let seen = t.seen.lock();
        assert_eq!(seen[0].0, "http://h/v1/chat/completions");
        assert_eq!(seen[0].1.as_deref(), Some("k"));
        assert_eq!(seen[0].2["messages"][0]["role"], "system");
        assert_eq!(seen[0].2["max_tokens"], 16);
    }

    #[test]
    fn auth_failure_is_not_retried() {
        let t = FakeTransport::new(vec![(401, "nope"), (200, OK)]);
        let chat = RemoteChat::new("http://h".into(), None, t, &cfg()).with_retry_policy(RetryPolicy::no_delay(4));
        assert!(matches!(chat.chat_complete(&request()), Err(ProviderError::Auth(_))));
        assert_eq!(chat.total_attempts(), 1);
    }

    #[test]
    fn rate_limit_exhaustion_after_retries() {
        let t = FakeTransport::new(vec![(429, "slow down"); 3]);
        let chat = RemoteChat::new("http://h".into(), None, t, &cfg()).with_retry_policy(RetryPolicy::no_delay(2));
        assert_eq!(
            chat.chat_complete(&request()).unwrap_err(),
            ProviderError::RateLimitExhausted { attempts: 3 }
        );
    }

    #[test]
    fn empty_completion_is_an_error() {
        let t = FakeTransport::new(vec![(200, r#"{"choices":[{"message":{"content":"  "}}]}"#)]);
        let chat = RemoteChat::new("http://h".into(), None, t, &cfg());
        assert_eq!(
            chat.chat_complete(&request()).unwrap_err(),
            ProviderError::EmptyCompletion
        );
    }

    #[test]
    fn embeddings_are_reordered_by_index() {
        let t = FakeTransport::new(vec![(
            200,
            r#"{"data":[{"index":1,"embedding":[0.0,2.0]},{"index":0,"embedding":[3.0,4.0]}]}"#,
        )]);
        let e = RemoteEmbedder::new("http://h".into(), None, t, &cfg());
        let v = e.embed_batch(&["a".into(), "b".into()]).unwrap();
        assert_eq!(v[0].values, vec![0.6, 0.8]);
        assert_eq!(v[1].values, vec![0.0, 1.0]);
    }

    #[test]
    fn scorer_parses_tokens_and_context_overflow() {
        let body = r#"{"tokens":[{"logprob_actual":-0.5,"entropy":1.0,"in_top_k":true,"expected_logprob":-1.0,"logprob_variance":0.25}]}"#;
        let t = FakeTransport::new(vec![(200, body), (413, r#"{"context_limit":4096,"tokens":5000}"#)]);
        let s = RemoteScorer::new("http://h".into(), None, t, &cfg());
        let scores = s.score_tokens("text", 200).unwrap();
        assert_eq!(scores[0].logprob_variance, 0.25);
        assert_eq!(
            s.score_tokens("text", 200).unwrap_err(),
            ProviderError::ContextLimit { limit: 4096, got: 5000 }
        );
    }
}
