//! JSON-over-HTTP translation client.
//!
//! Wire format: `POST <endpoint>/translate` with body
//! `{"source": "en", "target": "de", "texts": ["...", ...]}`; a 200 response
//! carries `{"translations": ["...", ...]}` with one entry per input, in
//! order. Timeouts, transport failures, 429 and 5xx responses are retried
//! with exponential backoff and jitter. Other statuses and malformed bodies
//! fail immediately.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::backend::{BackendError, TranslationBackend};

/// Environment variable read for the auth header value unless configured otherwise.
pub const DEFAULT_AUTH_ENV: &str = "NER_AUGMENT_HTTP_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpBackendConfig {
    /// Base URL; `/translate` is appended unless already present.
    pub endpoint: String,
    /// Header that carries the token, e.g. `Authorization`. No auth when unset.
    pub auth_header: Option<String>,
    /// Environment variable holding the header value.
    pub auth_env: String,
    pub timeout_ms: u64,
    pub max_batch: usize,
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// First backoff delay; doubles with every retry.
    pub backoff_ms: u64,
}

impl HttpBackendConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpBackendConfig {
            endpoint: endpoint.into(),
            ..Default::default()
        }
    }
}

impl Default for HttpBackendConfig {
    fn default() -> Self {
        HttpBackendConfig {
            endpoint: String::new(),
            auth_header: None,
            auth_env: DEFAULT_AUTH_ENV.to_string(),
            timeout_ms: 30_000,
            max_batch: 32,
            max_retries: 4,
            backoff_ms: 250,
        }
    }
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    source: &'a str,
    target: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct TranslateResponse {
    translations: Vec<String>,
}

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    auth: Option<(String, String)>,
    config: HttpBackendConfig,
    requests: AtomicU64,
}

impl HttpBackend {
    pub fn new(config: HttpBackendConfig) -> Result<Self, BackendError> {
        if config.endpoint.is_empty() {
            return Err(BackendError::Config("empty endpoint URL".into()));
        }
        if config.max_batch == 0 {
            return Err(BackendError::Config("max_batch must be at least 1".into()));
        }
        let base = config.endpoint.trim_end_matches('/');
        let url = if base.ends_with("/translate") {
            base.to_string()
        } else {
            format!("{base}/translate")
        };
        let auth = match &config.auth_header {
            Some(name) => {
                let value = std::env::var(&config.auth_env).map_err(|_| {
                    BackendError::Config(format!("auth header {name} requested but ${} is not set", config.auth_env))
                })?;
                Some((name.clone(), value))
            }
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url,
            auth,
            config,
            requests: AtomicU64::new(0),
        })
    }

    /// HTTP requests issued so far, retries included.
    pub fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    fn send_once(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>, BackendError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let mut request = self.client.post(&self.url).json(&TranslateRequest { source, target, texts });
        if let Some((name, value)) = &self.auth {
            request = request.header(name.as_str(), value.as_str());
        }
        let response = request.send().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::Transport(e.to_string())
            }
        })?;
        let status = response.status();
        if !status.is_success() {
            return Err(BackendError::HttpStatus(status.as_u16()));
        }
        let body: TranslateResponse = response.json().map_err(|e| {
            if e.is_timeout() {
                BackendError::Timeout
            } else {
                BackendError::MalformedResponse(e.to_string())
            }
        })?;
        if body.translations.len() != texts.len() {
            return Err(BackendError::MalformedResponse(format!(
                "sent {} texts, got {} translations",
                texts.len(),
                body.translations.len()
            )));
        }
        Ok(body.translations)
    }

    fn send_with_retry(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>, BackendError> {
        let mut attempt = 0;
        loop {
            match self.send_once(source, target, texts) {
                Ok(out) => return Ok(out),
                Err(e) if e.is_transient() && attempt < self.config.max_retries => {
                    let delay = self.backoff(attempt);
                    log::debug!("{} {source}->{target}: {e}; retrying in {delay:?}", self.url);
                    std::thread::sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let base = self.config.backoff_ms;
        let exp = base.saturating_mul(1u64 << attempt.min(16));
        let jitter = if base > 0 { rand::rng().random_range(0..=base) } else { 0 };
        Duration::from_millis(exp.saturating_add(jitter))
    }
}

impl TranslationBackend for HttpBackend {
    fn translate(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>, BackendError> {
        let mut out = Vec::with_capacity(texts.len());
        for chunk in texts.chunks(self.config.max_batch) {
            out.extend(self.send_with_retry(source, target, chunk)?);
        }
        Ok(out)
    }

    fn batch_limit(&self) -> usize {
        self.config.max_batch
    }
}
