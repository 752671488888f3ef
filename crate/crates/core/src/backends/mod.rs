//! Model backends for the three pipeline roles.
//!
//! A [`Client`] wraps one [`Transport`] with the profile's decoding parameters,
//! concurrency limit and retry policy. Transports are created by name through a
//! [`TransportRegistry`]: `mock:<name>` endpoints resolve to the deterministic
//! mock, `http://` and `https://` endpoints to the chat-completion client.

mod http;
mod mock;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::PromptBundle;

pub use http::HttpTransport;
pub use mock::{MockBehavior, MockTransport, ScriptRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Describe,
    Summarize,
    Translate,
}

impl Role {
    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Describe => "describe",
            Role::Summarize => "summarize",
            Role::Translate => "translate",
        }
    }

    /// Environment variable consulted for this role's API key.
    pub fn api_key_var(&self) -> String {
        format!("SUBGRAIN_API_KEY_{}", self.as_str().to_ascii_uppercase())
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodingParams {
    pub max_new_tokens: u32,
    pub greedy: bool,
    pub repetition_penalty: f64,
    pub temperature: f64,
    pub top_p: f64,
}

impl DecodingParams {
    pub const TRANSLATOR: DecodingParams = DecodingParams {
        max_new_tokens: 100,
        greedy: true,
        repetition_penalty: 1.1,
        temperature: 1.0,
        top_p: 1.0,
    };

    pub const SUMMARIZER: DecodingParams = DecodingParams {
        max_new_tokens: 256,
        greedy: true,
        repetition_penalty: 1.0,
        temperature: 1.0,
        top_p: 1.0,
    };

    pub fn for_role(role: Role) -> Self {
        match role {
            Role::Translate => Self::TRANSLATOR,
            // describer settings are not reported; the summarizer's are the closest fit
            Role::Summarize | Role::Describe => Self::SUMMARIZER,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    /// Total tries, including the first.
    pub attempts: u32,
    pub backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            attempts: 3,
            backoff_ms: 500,
        }
    }
}

/// How prompts travel to an HTTP server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WireMode {
    /// `messages: [system, user]` chat-completion request.
    #[default]
    Chat,
    /// Pre-templated string including the chat control tokens, sent as `prompt`.
    Raw,
}

/// Configuration block found under `backends.<role>`. Omitted decoding
/// parameters take the role defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub endpoint: String,
    #[serde(default)]
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_new_tokens: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub greedy: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetition_penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub wire: WireMode,
    /// Scripted replies for `mock:scripted`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub script: Vec<ScriptRule>,
    /// Number of leading calls the mock fails with a retriable error.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub mock_failures: u32,
}

fn is_zero(n: &u32) -> bool {
    *n == 0
}

fn default_concurrency() -> usize {
    4
}

fn default_timeout() -> u64 {
    60_000
}

impl ProfileConfig {
    pub fn mock(name: &str) -> Self {
        Self {
            endpoint: format!("mock:{name}"),
            model: String::new(),
            max_new_tokens: None,
            greedy: None,
            repetition_penalty: None,
            temperature: None,
            top_p: None,
            max_concurrency: default_concurrency(),
            timeout_ms: default_timeout(),
            retry: RetryPolicy::default(),
            wire: WireMode::Chat,
            script: Vec::new(),
            mock_failures: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendProfile {
    pub role: Role,
    pub endpoint: String,
    pub model_name: String,
    pub params: DecodingParams,
    pub max_concurrency: usize,
    pub timeout_ms: u64,
    pub retry: RetryPolicy,
    pub wire: WireMode,
    pub script: Vec<ScriptRule>,
    pub mock_failures: u32,
    pub seed: u64,
}

impl BackendProfile {
    pub fn resolve(role: Role, config: &ProfileConfig, seed: u64) -> Result<Self, BackendError> {
        let defaults = DecodingParams::for_role(role);
        let params = DecodingParams {
            max_new_tokens: config.max_new_tokens.unwrap_or(defaults.max_new_tokens),
            greedy: config.greedy.unwrap_or(defaults.greedy),
            repetition_penalty: config.repetition_penalty.unwrap_or(defaults.repetition_penalty),
            temperature: config.temperature.unwrap_or(defaults.temperature),
            top_p: config.top_p.unwrap_or(defaults.top_p),
        };
        if params.max_new_tokens == 0 {
            return Err(BackendError::Config("max_new_tokens must be positive".into()));
        }
        if params.repetition_penalty < 1.0 {
            return Err(BackendError::Config("repetition_penalty must be >= 1".into()));
        }
        if config.max_concurrency == 0 {
            return Err(BackendError::Config("max_concurrency must be positive".into()));
        }
        if config.retry.attempts == 0 {
            return Err(BackendError::Config("retry.attempts must be positive".into()));
        }
        Ok(Self {
            role,
            endpoint: config.endpoint.clone(),
            model_name: config.model.clone(),
            params,
            max_concurrency: config.max_concurrency,
            timeout_ms: config.timeout_ms,
            retry: config.retry,
            wire: config.wire,
            script: config.script.clone(),
            mock_failures: config.mock_failures,
            seed,
        })
    }

    /// `mock`, `http`, `https`, ... the part of the endpoint before the first `:`.
    pub fn scheme(&self) -> &str {
        self.endpoint.split(':').next().unwrap_or("")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("http status {status}: {body}")]
    Status { status: u16, body: String },
    #[error("model returned an empty completion")]
    EmptyOutput,
    #[error("refusing to send an empty prompt")]
    EmptyPrompt,
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error("unrecognized response: {0}")]
    Protocol(String),
}

impl BackendError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, BackendError::Transport(_))
    }
}

/// One model invocation as seen by a transport.
#[derive(Debug, Clone)]
pub struct ModelRequest<'a> {
    pub role: Role,
    pub model: &'a str,
    pub params: &'a DecodingParams,
    pub wire: WireMode,
    pub prompt: RequestBody<'a>,
}

#[derive(Debug, Clone)]
pub enum RequestBody<'a> {
    Text(&'a PromptBundle),
    Image { path: &'a Path, bytes: Vec<u8> },
}

/// Moves one request to a model and back. Implementations must not keep
/// cross-request state that changes answers.
pub trait Transport: Send + Sync {
    fn send(&self, request: &ModelRequest<'_>) -> Result<String, BackendError>;
}

/// The interface the rest of the pipeline programs against.
pub trait Backend: Send + Sync {
    fn profile(&self) -> &BackendProfile;

    fn complete(&self, prompt: &PromptBundle) -> Result<String, BackendError>;

    fn describe_frame(&self, image: &Path) -> Result<String, BackendError>;

    /// Successful completions so far. Used by the resume bookkeeping.
    fn calls(&self) -> u64;
}

struct Gate {
    limit: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl Gate {
    fn new(limit: usize) -> Self {
        Self {
            limit,
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }

    fn acquire(&self) -> GateGuard<'_> {
        let mut n = self.in_flight.lock().expect("gate poisoned");
        while *n >= self.limit {
            n = self.freed.wait(n).expect("gate poisoned");
        }
        *n += 1;
        GateGuard { gate: self }
    }
}

struct GateGuard<'a> {
    gate: &'a Gate,
}

impl Drop for GateGuard<'_> {
    fn drop(&mut self) {
        let mut n = self.gate.in_flight.lock().expect("gate poisoned");
        *n -= 1;
        self.gate.freed.notify_one();
    }
}

/// Profile-bound backend: concurrency limit, retries and call accounting
/// around a transport.
pub struct Client {
    profile: BackendProfile,
    transport: Box<dyn Transport>,
    gate: Gate,
    calls: AtomicU64,
    attempts: AtomicU64,
}

impl Client {
    pub fn new(profile: BackendProfile, transport: Box<dyn Transport>) -> Self {
        let gate = Gate::new(profile.max_concurrency);
        Self {
            profile,
            transport,
            gate,
            calls: AtomicU64::new(0),
            attempts: AtomicU64::new(0),
        }
    }

    /// Transport invocations including failed ones.
    pub fn attempts(&self) -> u64 {
        self.attempts.load(Ordering::SeqCst)
    }

    fn run(&self, request: &ModelRequest<'_>) -> Result<String, BackendError> {
        let policy = self.profile.retry;
        let mut last = None;
        for attempt in 0..policy.attempts {
            if attempt > 0 && policy.backoff_ms > 0 {
                std::thread::sleep(Duration::from_millis(policy.backoff_ms * attempt as u64));
            }
            let result = {
                let _slot = self.gate.acquire();
                self.attempts.fetch_add(1, Ordering::SeqCst);
                self.transport.send(request)
            };
            match result {
                Ok(text) if text.trim().is_empty() => return Err(BackendError::EmptyOutput),
                Ok(text) => {
                    self.calls.fetch_add(1, Ordering::SeqCst);
                    return Ok(text);
                }
                Err(e) if e.is_retriable() => {
                    log::warn!(
                        "{} backend attempt {}/{} failed: {e}",
                        self.profile.role,
                        attempt + 1,
                        policy.attempts
                    );
                    last = Some(e);
                }
                Err(e) => return Err(e),
            }
        }
        Err(BackendError::Exhausted {
            attempts: policy.attempts,
            last: last.map(|e| e.to_string()).unwrap_or_default(),
        })
    }
}

impl Backend for Client {
    fn profile(&self) -> &BackendProfile {
        &self.profile
    }

    fn complete(&self, prompt: &PromptBundle) -> Result<String, BackendError> {
        if prompt.system_text.trim().is_empty() && prompt.user_text.trim().is_empty() {
            return Err(BackendError::EmptyPrompt);
        }
        let request = ModelRequest {
            role: self.profile.role,
            model: &self.profile.model_name,
            params: &self.profile.params,
            wire: self.profile.wire,
            prompt: RequestBody::Text(prompt),
        };
        self.run(&request)
    }

    fn describe_frame(&self, image: &Path) -> Result<String, BackendError> {
        if self.profile.role != Role::Describe {
            return Err(BackendError::Config(format!(
                "describe_frame called on a {} backend",
                self.profile.role
            )));
        }
        let bytes = std::fs::read(image).map_err(|e| BackendError::Io {
            path: image.to_path_buf(),
            message: e.to_string(),
        })?;
        let request = ModelRequest {
            role: self.profile.role,
            model: &self.profile.model_name,
            params: &self.profile.params,
            wire: self.profile.wire,
            prompt: RequestBody::Image { path: image, bytes },
        };
        self.run(&request)
    }

    fn calls(&self) -> u64 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<B: Backend + ?Sized> Backend for Arc<B> {
    fn profile(&self) -> &BackendProfile {
        self.as_ref().profile()
    }
    fn complete(&self, prompt: &PromptBundle) -> Result<String, BackendError> {
        self.as_ref().complete(prompt)
    }
    fn describe_frame(&self, image: &Path) -> Result<String, BackendError> {
        self.as_ref().describe_frame(image)
    }
    fn calls(&self) -> u64 {
        self.as_ref().calls()
    }
}

pub type TransportFactory = fn(&BackendProfile) -> Result<Box<dyn Transport>, BackendError>;

/// Endpoint scheme to transport constructor.
pub struct TransportRegistry {
    factories: BTreeMap<String, TransportFactory>,
}

impl Default for TransportRegistry {
    fn default() -> Self {
        let mut registry = Self {
            factories: BTreeMap::new(),
        };
        registry.register("mock", MockTransport::from_profile);
        registry.register("http", HttpTransport::from_profile);
        registry.register("https", HttpTransport::from_profile);
        registry
    }
}

impl TransportRegistry {
    pub fn register(&mut self, scheme: &str, factory: TransportFactory) {
        self.factories.insert(scheme.to_string(), factory);
    }

    pub fn schemes(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }

    pub fn build(&self, profile: BackendProfile) -> Result<Client, BackendError> {
        let factory = self.factories.get(profile.scheme()).ok_or_else(|| {
            BackendError::Config(format!(
                "no transport registered for endpoint {:?} (known: {})",
                profile.endpoint,
                self.schemes().collect::<Vec<_>>().join(", ")
            ))
        })?;
        let transport = factory(&profile)?;
        Ok(Client::new(profile, transport))
    }
}
