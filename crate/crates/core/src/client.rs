//! HTTP dispatch of prompts to a chat-completion endpoint, with bounded
//! retries and a content-addressed response cache.
//!
//! The wire format is a single JSON object per request: `{model, prompt,
//! temperature, top_p, max_tokens}`. Both completion-style
//! (`choices[0].text`) and chat-style (`choices[0].message.content`) reply
//! envelopes are accepted. Responses are returned verbatim, untrimmed.

use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Decoding hyperparameters sent with every request.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_new_tokens: u32,
}

impl Default for DecodingParams {
    fn default() -> DecodingParams {
        DecodingParams {
            temperature: 0.01,
            top_p: 0.9,
            max_new_tokens: 128,
        }
    }
}

/// One reply from the endpoint (or the cache). Empty text is a legal,
/// meaningful response.
#[derive(Debug, Clone, PartialEq)]
pub struct RawResponse {
    pub text: String,
    pub model_id: String,
    pub latency: Duration,
    pub from_cache: bool,
}

impl RawResponse {
    /// A response that did not cross the network; used by tests and replay.
    pub fn local(text: String, model_id: &str) -> RawResponse {
        RawResponse {
            text,
            model_id: model_id.to_string(),
            latency: Duration::ZERO,
            from_cache: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("endpoint returned HTTP {code}: {body}")]
    BadStatus { code: u16, body: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("response envelope not recognized: {body}")]
    BadEnvelope { body: String },
    #[error("cache entry {key} is corrupt")]
    CacheCorrupt { key: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Exponential backoff applied to transport errors, timeouts, and HTTP
/// 429/5xx only.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub factor: f64,
}

impl Default for RetryPolicy {
    fn default() -> RetryPolicy {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_secs(1),
            factor: 2.0,
        }
    }
}

impl RetryPolicy {
    /// Zero-delay policy for tests.
    pub fn immediate(max_attempts: u32) -> RetryPolicy {
        RetryPolicy {
            max_attempts,
            base_delay: Duration::ZERO,
            factor: 1.0,
        }
    }

    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(attempt as i32 - 1))
    }
}

fn retryable_status(code: u16) -> bool {
    code == 429 || (500..600).contains(&code)
}

enum AttemptFailure {
    Status { code: u16, body: String },
    Timeout,
    Transport(String),
}

/// A client bound to one endpoint and model.
pub struct LlmClient {
    agent: ureq::Agent,
    endpoint: String,
    model_id: String,
    params: DecodingParams,
    retry: RetryPolicy,
    api_key: Option<String>,
}

impl LlmClient {
    pub fn new(endpoint: &str, model_id: &str) -> LlmClient {
        LlmClient::with_timeout(endpoint, model_id, Duration::from_secs(60))
    }

    pub fn with_timeout(endpoint: &str, model_id: &str, timeout: Duration) -> LlmClient {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        LlmClient {
            agent,
            endpoint: endpoint.to_string(),
            model_id: model_id.to_string(),
            params: DecodingParams::default(),
            retry: RetryPolicy::default(),
            api_key: None,
        }
    }

    pub fn with_params(mut self, params: DecodingParams) -> LlmClient {
        self.params = params;
        self
    }

    /// Bearer token sent as the Authorization header when present.
    pub fn with_api_key(mut self, api_key: Option<String>) -> LlmClient {
        self.api_key = api_key;
        self
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> LlmClient {
        self.retry = retry;
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn params(&self) -> DecodingParams {
        self.params
    }

    fn attempt(&self, prompt: &str) -> Result<String, AttemptFailure> {
        let body = serde_json::json!({
            "model": self.model_id,
            "prompt": prompt,
            "temperature": self.params.temperature,
            "top_p": self.params.top_p,
            "max_tokens": self.params.max_new_tokens,
        });
        let mut request = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            request = request.header("authorization", &format!("Bearer {key}"));
        }
        let mut response = request.send_json(&body).map_err(|err| match err {
            ureq::Error::Timeout(_) => AttemptFailure::Timeout,
            other => AttemptFailure::Transport(other.to_string()),
        })?;
        let code = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|err| AttemptFailure::Transport(err.to_string()))?;
        if (200..300).contains(&code) {
            Ok(text)
        } else {
            Err(AttemptFailure::Status { code, body: text })
        }
    }

    /// Send one prompt, retrying per the policy, and return the generated
    /// text verbatim together with the observed wall time.
    pub fn complete(&self, prompt: &str) -> Result<RawResponse, ClientError> {
        let start = Instant::now();
        let mut last_failure: Option<AttemptFailure> = None;
        for attempt in 1..=self.retry.max_attempts {
            match self.attempt(prompt) {
                Ok(body) => {
                    let text = extract_generated_text(&body)
                        .ok_or(ClientError::BadEnvelope { body })?;
                    return Ok(RawResponse {
                        text,
                        model_id: self.model_id.clone(),
                        latency: start.elapsed(),
                        from_cache: false,
                    });
                }
                Err(AttemptFailure::Status { code, body }) if !retryable_status(code) => {
                    return Err(ClientError::BadStatus { code, body });
                }
                Err(failure) => {
                    log::debug!(
                        "attempt {attempt}/{} against {} failed; retrying",
                        self.retry.max_attempts,
                        self.endpoint
                    );
                    last_failure = Some(failure);
                    if attempt < self.retry.max_attempts {
                        std::thread::sleep(self.retry.delay(attempt));
                    }
                }
            }
        }
        let attempts = self.retry.max_attempts;
        Err(match last_failure {
            Some(AttemptFailure::Timeout) => ClientError::Timeout { attempts },
            Some(AttemptFailure::Status { code, body }) => ClientError::BadStatus { code, body },
            Some(AttemptFailure::Transport(message)) => {
                ClientError::Transport { attempts, message }
            }
            None => ClientError::Transport {
                attempts,
                message: "no attempts were made".to_string(),
            },
        })
    }
}

/// Pull the generated text out of either supported reply envelope.
fn extract_generated_text(body: &str) -> Option<String> {
    let value: serde_json::Value = serde_json::from_str(body).ok()?;
    let choice = value.get("choices")?.get(0)?;
    if let Some(content) = choice.pointer("/message/content").and_then(|v| v.as_str()) {
        return Some(content.to_string());
    }
    choice.get("text").and_then(|v| v.as_str()).map(str::to_string)
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheEntry {
    model_id: String,
    temperature: f64,
    top_p: f64,
    max_new_tokens: u32,
    text: String,
}

/// Directory-backed response store, one JSON file per key. Writes are
/// serialized within the process and performed atomically via rename so
/// concurrent readers never observe partial entries.
pub struct ResponseCache {
    dir: PathBuf,
    write_lock: Mutex<()>,
}

impl ResponseCache {
    pub fn open(dir: impl AsRef<Path>) -> Result<ResponseCache, ClientError> {
        std::fs::create_dir_all(dir.as_ref())?;
        Ok(ResponseCache {
            dir: dir.as_ref().to_path_buf(),
            write_lock: Mutex::new(()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Content hash over model, decoding parameters, and prompt bytes.
    pub fn key(model_id: &str, params: DecodingParams, prompt: &str) -> String {
        let mut hasher = Sha256::new();
        hasher.update(model_id.as_bytes());
        hasher.update([0]);
        hasher.update(format!(
            "{:e}\x00{:e}\x00{}",
            params.temperature, params.top_p, params.max_new_tokens
        ));
        hasher.update([0]);
        hasher.update(prompt.as_bytes());
        hex_lower(&hasher.finalize())
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    /// Look up a key. A corrupt entry yields `CacheCorrupt` so the caller can
    /// discard and refetch.
    pub fn get(&self, key: &str) -> Result<Option<String>, ClientError> {
        let path = self.entry_path(key);
        let bytes = match std::fs::read(&path) {
            Ok(bytes) => bytes,
            Err(err) if err.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(err) => return Err(ClientError::Io(err)),
        };
        match serde_json::from_slice::<CacheEntry>(&bytes) {
            Ok(entry) => Ok(Some(entry.text)),
            Err(_) => Err(ClientError::CacheCorrupt { key: key.to_string() }),
        }
    }

    pub fn put(
        &self,
        key: &str,
        model_id: &str,
        params: DecodingParams,
        text: &str,
    ) -> Result<(), ClientError> {
        let entry = CacheEntry {
            model_id: model_id.to_string(),
            temperature: params.temperature,
            top_p: params.top_p,
            max_new_tokens: params.max_new_tokens,
            text: text.to_string(),
        };
        let payload = serde_json::to_vec_pretty(&entry).expect("cache entry serializes");
        let _guard = self.write_lock.lock().expect("cache lock poisoned");
        let tmp = self.dir.join(format!("{key}.json.tmp"));
        std::fs::write(&tmp, payload)?;
        std::fs::rename(&tmp, self.entry_path(key))?;
        Ok(())
    }

    fn discard(&self, key: &str) {
        let _guard = self.write_lock.lock().expect("cache lock poisoned");
        let _ = std::fs::remove_file(self.entry_path(key));
    }
}

fn hex_lower(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache-through completion: hits return the stored text with
/// `from_cache = true` and no network traffic; misses call the endpoint and
/// persist the reply. Corrupt entries are discarded and refetched.
pub fn cached_complete(
    cache: &ResponseCache,
    client: &LlmClient,
    prompt: &str,
) -> Result<RawResponse, ClientError> {
    let start = Instant::now();
    let key = ResponseCache::key(client.model_id(), client.params(), prompt);
    match cache.get(&key) {
        Ok(Some(text)) => {
            return Ok(RawResponse {
                text,
                model_id: client.model_id().to_string(),
                latency: start.elapsed(),
                from_cache: true,
            })
        }
        Ok(None) => {}
        Err(ClientError::CacheCorrupt { .. }) => {
            log::warn!("discarding corrupt cache entry {key}");
            cache.discard(&key);
        }
        Err(other) => return Err(other),
    }
    let response = client.complete(prompt)?;
    cache.put(&key, client.model_id(), client.params(), &response.text)?;
    Ok(response)
}
