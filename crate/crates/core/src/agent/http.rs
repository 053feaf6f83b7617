//! Chat-completion backend over HTTP.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::backend::{BackendError, LlmBackend};
use super::ChatMessage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HttpConfig {
    /// Either an API root (`/chat/completions` is appended) or the full
    /// completion endpoint.
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
    pub timeout_secs: f64,
    pub retries: u32,
    pub backoff_ms: u64,
    /// Name of the environment variable holding the bearer token.
    pub api_key_env: Option<String>,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            base_url: "https://api.openai.com/v1".into(),
            model: "gpt-3.5-turbo-16k".into(),
            temperature: 0.0,
            timeout_secs: 60.0,
            retries: 3,
            backoff_ms: 500,
            api_key_env: Some("OPENAI_API_KEY".into()),
        }
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    cfg: HttpConfig,
    api_key: Option<String>,
}

enum Attempt {
    Retry(String),
    Fatal(BackendError),
}

impl HttpBackend {
    pub fn new(cfg: HttpConfig) -> Result<Self, BackendError> {
        let base = cfg.base_url.trim_end_matches('/');
        if !(base.starts_with("http://") || base.starts_with("https://")) {
            return Err(BackendError::Config(format!("base_url '{}' is not an http(s) URL", cfg.base_url)));
        }
        let endpoint =
            if base.ends_with("/chat/completions") { base.to_string() } else { format!("{base}/chat/completions") };
        if cfg.timeout_secs.is_nan() || cfg.timeout_secs <= 0.0 {
            return Err(BackendError::Config("timeout_secs must be positive".into()));
        }
        let api_key = cfg.api_key_env.as_deref().and_then(|var| std::env::var(var).ok()).filter(|k| !k.is_empty());
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs_f64(cfg.timeout_secs))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend { client, endpoint, cfg, api_key })
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    fn attempt(&self, body: &serde_json::Value) -> Result<String, Attempt> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            return Err(Attempt::Fatal(BackendError::AuthError { status: status.as_u16() }));
        }
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("HTTP {}", status.as_u16())));
        }
        let text = resp.text().map_err(|e| Attempt::Retry(e.to_string()))?;
        if !status.is_success() {
            return Err(Attempt::Fatal(BackendError::Rejected { status: status.as_u16(), body: text }));
        }
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| Attempt::Fatal(BackendError::MalformedResponse(e.to_string())))?;
        value
            .pointer("/choices/0/message/content")
            .and_then(|c| c.as_str())
            .map(str::to_string)
            .ok_or_else(|| Attempt::Fatal(BackendError::MalformedResponse("no choices[0].message.content".into())))
    }
}

impl LlmBackend for HttpBackend {
    fn complete(&self, messages: &[ChatMessage]) -> Result<String, BackendError> {
        let body = json!({
            "model": self.cfg.model,
            "temperature": self.cfg.temperature,
            "messages": messages,
        });
        let attempts = self.cfg.retries + 1;
        let mut last = String::new();
        for n in 0..attempts {
            if n > 0 {
                let delay = self.cfg.backoff_ms.saturating_mul(1u64 << (n - 1).min(16));
                thread::sleep(Duration::from_millis(delay));
            }
            match self.attempt(&body) {
                Ok(text) => return Ok(text),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(reason)) => {
                    tracing::warn!(attempt = n + 1, %reason, "completion request failed");
                    last = reason;
                }
            }
        }
        Err(BackendError::BackendUnavailable { attempts, reason: last })
    }
}
