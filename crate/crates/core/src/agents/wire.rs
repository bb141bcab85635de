//! Chat-completion wire types and backends.
//!
//! One request shape covers every backend: model id, messages, temperature,
//! max tokens, optional seed. The HTTP backend speaks the common
//! chat-completions JSON dialect; stub backends answer deterministically for
//! offline runs and tests.

use super::AgentError;
use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;
use std::time::Duration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        ChatMessage {
            role: Role::User,
            content: content.into(),
        }
    }
}

/// One chat-completion request; also the replay-cache key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
}

pub const DEFAULT_MAX_NEW_TOKENS: u32 = 400;

fn default_max_new_tokens() -> u32 {
    DEFAULT_MAX_NEW_TOKENS
}

/// Where and how to reach a chat backend.
///
/// `temperature` is optional so each pipeline role can fill its own default
/// (0.0 for classification, 0.7 for prompt generation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub name: String,
    /// `http(s)://...` endpoint, or `stub://yes|no|hash|prompts` for the
    /// built-in deterministic backends.
    pub endpoint: String,
    pub model_id: String,
    #[serde(default = "default_max_new_tokens")]
    pub max_new_tokens: u32,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub request_seed: Option<u64>,
    /// Name of the environment variable holding the bearer token.
    #[serde(default)]
    pub auth_env: Option<String>,
}

impl BackendConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if self.max_new_tokens < 1 {
            return Err(AgentError::InvalidBackend(format!(
                "backend {}: max_new_tokens must be at least 1",
                self.name
            )));
        }
        if let Some(t) = self.temperature {
            if t.is_nan() || t < 0.0 {
                return Err(AgentError::InvalidBackend(format!(
                    "backend {}: temperature must be non-negative, got {t}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn temperature_or(&self, default: f64) -> f64 {
        self.temperature.unwrap_or(default)
    }
}

/// A chat-completion backend. Implementations must be deterministic given a
/// fixed request whenever they claim to be (stubs always are).
#[async_trait::async_trait]
pub trait ChatBackend: Send + Sync {
    fn config(&self) -> &BackendConfig;

    fn name(&self) -> &str {
        &self.config().name
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, AgentError>;
}

/// Retry on transport errors and 5xx, with exponential backoff.
#[derive(Debug, Clone)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 3,
            base_delay: Duration::from_secs(1),
        }
    }
}

/// HTTP chat-completions backend.
pub struct HttpBackend {
    config: BackendConfig,
    retry: RetryPolicy,
    client: reqwest::Client,
}

#[derive(Deserialize)]
struct WireResponse {
    choices: Vec<WireChoice>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
}

#[derive(Deserialize)]
struct WireMessage {
    content: Option<String>,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Result<Self, AgentError> {
        config.validate()?;
        if !config.endpoint.starts_with("http://") && !config.endpoint.starts_with("https://") {
            return Err(AgentError::InvalidBackend(format!(
                "backend {}: endpoint must be http(s), got {}",
                config.name, config.endpoint
            )));
        }
        Ok(HttpBackend {
            config,
            retry: RetryPolicy::default(),
            client: reqwest::Client::new(),
        })
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    async fn send_once(&self, request: &ChatRequest) -> Result<ChatResponse, SendError> {
        let mut req = self.client.post(&self.config.endpoint).json(request);
        if let Some(var) = &self.config.auth_env {
            if let Ok(token) = std::env::var(var) {
                req = req.bearer_auth(token);
            }
        }
        let response = req
            .send()
            .await
            .map_err(|e| SendError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(SendError::Status(status.as_u16(), body));
        }
        let body: WireResponse = response
            .json()
            .await
            .map_err(|e| SendError::Transport(format!("malformed response body: {e}")))?;
        let content = body
            .choices
            .first()
            .and_then(|c| c.message.content.clone())
            .unwrap_or_default();
        Ok(ChatResponse { content })
    }
}

enum SendError {
    Transport(String),
    Status(u16, String),
}

impl SendError {
    fn retryable(&self) -> bool {
        match self {
            SendError::Transport(_) => true,
            SendError::Status(code, _) => *code >= 500,
        }
    }
}

#[async_trait::async_trait]
impl ChatBackend for HttpBackend {
    fn config(&self) -> &BackendConfig {
        &self.config
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, AgentError> {
        let mut attempts = 0;
        let mut delay = self.retry.base_delay;
        loop {
            attempts += 1;
            match self.send_once(request).await {
                Ok(response) => return Ok(response),
                Err(e) if e.retryable() && attempts < self.retry.max_attempts => {
                    log::warn!(
                        "backend {} attempt {attempts} failed, retrying in {delay:?}",
                        self.config.name
                    );
                    tokio::time::sleep(delay).await;
                    delay *= 2;
                }
                Err(SendError::Transport(msg)) => {
                    return Err(AgentError::Backend {
                        status: None,
                        body: msg,
                        attempts,
                    })
                }
                Err(SendError::Status(code, body)) => {
                    return Err(AgentError::Backend {
                        status: Some(code),
                        body,
                        attempts,
                    })
                }
            }
        }
    }
}

/// What a stub backend answers.
#[derive(Debug, Clone)]
pub enum StubMode {
    /// Always the same text.
    FixedText(String),
    /// "Yes." to everything.
    AlwaysYes,
    /// "No." to everything.
    AlwaysNo,
    /// Deterministic yes/no keyed on a stable hash of the last user message.
    HashLabel,
    /// A series of distinct task instructions, indexed by request seed.
    PromptSeries,
}

/// In-process deterministic backend for offline runs and tests.
///
/// Counts calls and remembers the last request so tests can observe the wire
/// contract without a network.
pub struct StubBackend {
    config: BackendConfig,
    mode: StubMode,
    calls: AtomicU64,
    last_request: Mutex<Option<ChatRequest>>,
}

const STUB_PROMPTS: &[&str] = &[
    "Do the two statements report the same event or topic?",
    "Determine whether the two statements convey the same information. Answer yes or no.",
    "Compare the pair of statements and decide if they match. Respond with yes or no.",
    "Given a pair of statements, say whether both describe one underlying event. Reply yes or no.",
    "Judge if statement one and statement two refer to the same situation, answering yes or no.",
];

impl StubBackend {
    pub fn new(name: impl Into<String>, mode: StubMode) -> Self {
        let name = name.into();
        StubBackend {
            config: BackendConfig {
                name: name.clone(),
                endpoint: "stub://".to_string(),
                model_id: format!("stub-{name}"),
                max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
                temperature: Some(0.0),
                request_seed: None,
                auth_env: None,
            },
            mode,
            calls: AtomicU64::new(0),
            last_request: Mutex::new(None),
        }
    }

    /// Build from a `stub://` endpoint, keeping the rest of the config.
    pub fn from_config(config: BackendConfig) -> Result<Self, AgentError> {
        config.validate()?;
        let mode = match config.endpoint.as_str() {
            "stub://yes" => StubMode::AlwaysYes,
            "stub://no" => StubMode::AlwaysNo,
            "stub://hash" => StubMode::HashLabel,
            "stub://prompts" => StubMode::PromptSeries,
            other => {
                return Err(AgentError::InvalidBackend(format!(
                    "unknown stub endpoint {other}; expected stub://yes|no|hash|prompts"
                )))
            }
        };
        Ok(StubBackend {
            config,
            mode,
            calls: AtomicU64::new(0),
            last_request: Mutex::new(None),
        })
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn last_request(&self) -> Option<ChatRequest> {
        self.last_request.lock().unwrap().clone()
    }
}

#[async_trait::async_trait]
impl ChatBackend for StubBackend {
    fn config(&self) -> &BackendConfig {
        &self.config
    }

    async fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, AgentError> {
        let call_index = self.calls.fetch_add(1, Ordering::SeqCst);
        *self.last_request.lock().unwrap() = Some(request.clone());
        let content = match &self.mode {
            StubMode::FixedText(text) => text.clone(),
            StubMode::AlwaysYes => "Yes.".to_string(),
            StubMode::AlwaysNo => "No.".to_string(),
            StubMode::HashLabel => {
                let last_user = request
                    .messages
                    .iter()
                    .rev()
                    .find(|m| m.role == Role::User)
                    .map(|m| m.content.as_str())
                    .unwrap_or_default();
                if crate::embeddings::fnv1a(last_user.as_bytes()).is_multiple_of(2) {
                    "Yes, the two statements describe the same event.".to_string()
                } else {
                    "No, the statements do not match.".to_string()
                }
            }
            StubMode::PromptSeries => {
                let i = request.seed.unwrap_or(call_index) as usize;
                match STUB_PROMPTS.get(i) {
                    Some(p) => p.to_string(),
                    None => format!(
                        "Decide whether the paired statements describe the same event (variant {i}). Answer yes or no."
                    ),
                }
            }
        };
        Ok(ChatResponse { content })
    }
}
