use super::{ChatRequest, ChatResponse, LlmError};

/// A single network-facing endpoint. Implementations perform exactly one
/// attempt per call; retries, caching and fixtures live in
/// [`Provider`](super::Provider).
pub trait Backend: Send + Sync {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError>;

    /// One vector per input, in input order.
    fn embed(&self, model_name: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, LlmError>;
}
