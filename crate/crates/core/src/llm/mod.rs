//! Uniform access to chat-completion and embedding backends.
//!
//! A [`Provider`] wraps one of three modes:
//!
//! - `live`: calls an OpenAI-compatible HTTP endpoint.
//! - `replay`: serves recorded exchanges from a fixture directory and never
//!   touches the network.
//! - `record`: calls the endpoint and persists every exchange as a fixture.
//!
//! Fixtures are keyed by [`request_key`], a SHA-256 digest over the parts of a
//! request that influence the response.

mod backend;
mod fixtures;
mod http;
mod key;
pub mod mock_server;
mod provider;
pub mod simulated;

use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::Backend;
pub use fixtures::{FixtureKind, FixtureRecord, FixtureStore};
pub use http::HttpBackend;
pub use key::{embedding_key, request_key};
pub use provider::{LoggedRequest, Provider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_name: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
    /// Label for logs and fixture review. Not part of the request key.
    #[serde(default)]
    pub request_tag: String,
}

impl ChatRequest {
    pub fn validate(&self) -> Result<(), LlmError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| LlmError::InvalidRequest("messages must not be empty".into()))?;
        if first.role == Role::Assistant {
            return Err(LlmError::InvalidRequest(
                "first message must be a system or user message".into(),
            ));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::InvalidRequest(format!(
                "temperature must be finite and >= 0, got {}",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// All message contents joined, for prompt inspection.
    pub fn prompt_text(&self) -> String {
        self.messages
            .iter()
            .map(|m| m.content.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    ContentFilter,
    Other,
}

impl FinishReason {
    pub fn from_wire(s: Option<&str>) -> Self {
        match s {
            Some("stop") | None => Self::Stop,
            Some("length") => Self::Length,
            Some("content_filter") => Self::ContentFilter,
            Some(_) => Self::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
    pub total_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatResponse {
    pub content: String,
    pub finish_reason: FinishReason,
    pub usage: Usage,
    /// Served from the in-process response cache.
    #[serde(skip)]
    pub cached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub dim: usize,
    pub model_name: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_name: impl Into<String>) -> Result<Self, LlmError> {
        if values.is_empty() {
            return Err(LlmError::MalformedPayload("empty embedding vector".into()));
        }
        if values.iter().all(|v| *v == 0.0) {
            return Err(LlmError::MalformedPayload("all-zero embedding vector".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(LlmError::MalformedPayload("non-finite embedding component".into()));
        }
        Ok(Self {
            dim: values.len(),
            values,
            model_name: model_name.into(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderMode {
    Live,
    #[default]
    Replay,
    Record,
}

impl std::str::FromStr for ProviderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "live" => Ok(Self::Live),
            "replay" => Ok(Self::Replay),
            "record" => Ok(Self::Record),
            other => Err(format!("unknown provider mode `{other}` (live|replay|record)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_backoff_ms: u64,
    #[serde(default = "default_max_backoff_ms")]
    pub max_backoff_ms: u64,
}

fn default_max_backoff_ms() -> u64 {
    30_000
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 3,
            base_backoff_ms: 500,
            max_backoff_ms: default_max_backoff_ms(),
        }
    }
}

impl RetryPolicy {
    /// Delay before retry number `attempt` (1-based count of failures so far).
    pub fn backoff(&self, attempt: u32) -> Duration {
        let factor = 1u64 << attempt.saturating_sub(1).min(20);
        Duration::from_millis(self.base_backoff_ms.saturating_mul(factor).min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    #[serde(default = "default_base_url")]
    pub base_url: String,
    #[serde(default = "default_api_key_env")]
    pub api_key_env_name: String,
    #[serde(default = "default_chat_model")]
    pub chat_model: String,
    #[serde(default = "default_embedding_model")]
    pub embedding_model: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default)]
    pub retry: RetryPolicy,
    #[serde(default)]
    pub mode: ProviderMode,
    #[serde(default)]
    pub fixture_dir: Option<PathBuf>,
    #[serde(default = "default_true")]
    pub cache: bool,
    #[serde(default = "default_max_in_flight")]
    pub max_in_flight: usize,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
}

fn default_base_url() -> String {
    "https://api.openai.com/v1".into()
}
fn default_api_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_chat_model() -> String {
    "gpt-4".into()
}
fn default_embedding_model() -> String {
    "text-embedding-3-large".into()
}
fn default_timeout_secs() -> u64 {
    120
}
fn default_true() -> bool {
    true
}
fn default_max_in_flight() -> usize {
    4
}
fn default_max_tokens() -> u32 {
    1024
}

impl Default for ProviderConfig {
    fn default() -> Self {
        Self {
            base_url: default_base_url(),
            api_key_env_name: default_api_key_env(),
            chat_model: default_chat_model(),
            embedding_model: default_embedding_model(),
            timeout_secs: default_timeout_secs(),
            retry: RetryPolicy::default(),
            mode: ProviderMode::default(),
            fixture_dir: None,
            cache: true,
            max_in_flight: default_max_in_flight(),
            temperature: 0.0,
            max_tokens: default_max_tokens(),
        }
    }
}

impl ProviderConfig {
    pub fn validate(&self) -> Result<(), LlmError> {
        if self.retry.max_attempts < 1 {
            return Err(LlmError::Config("retry.max_attempts must be >= 1".into()));
        }
        if self.max_in_flight < 1 {
            return Err(LlmError::Config("max_in_flight must be >= 1".into()));
        }
        if matches!(self.mode, ProviderMode::Replay | ProviderMode::Record) && self.fixture_dir.is_none() {
            return Err(LlmError::Config(format!("{:?} mode requires fixture_dir", self.mode)));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(LlmError::Config("temperature must be finite and >= 0".into()));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::Config("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Builds a request with the configured model and decoding parameters.
    pub fn chat_request(&self, messages: Vec<Message>, tag: impl Into<String>) -> ChatRequest {
        ChatRequest {
            model_name: self.chat_model.clone(),
            messages,
            temperature: self.temperature,
            max_tokens: self.max_tokens,
            request_tag: tag.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("invalid provider configuration: {0}")]
    Config(String),
    #[error("environment variable `{0}` holding the API key is not set")]
    MissingApiKey(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("network error: {0}")]
    Network(String),
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("endpoint returned HTTP {status}: {body}")]
    HttpStatus { status: u16, body: String },
    #[error("malformed endpoint payload: {0}")]
    MalformedPayload(String),
    #[error("no fixture recorded for request key {key} ({tag})")]
    MissingFixture { key: String, tag: String },
    #[error("fixture store error at {path}: {message}")]
    Fixture { path: PathBuf, message: String },
    #[error("embedding dimension mismatch within batch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("request failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: Box<LlmError> },
}

impl LlmError {
    /// Transient failures worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            Self::Network(_) | Self::Timeout(_) => true,
            Self::HttpStatus { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}
