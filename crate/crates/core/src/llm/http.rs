//! Blocking client for OpenAI-compatible `/chat/completions` and `/embeddings`.

use std::time::Duration;

use reqwest::blocking::Client;
use serde::{Deserialize, Serialize};

use super::{Backend, ChatRequest, ChatResponse, FinishReason, LlmError, Message, Usage};

/// Header carrying the request tag. Ignored by real endpoints, used by the
/// mock server to pick a response script.
pub const REQUEST_TAG_HEADER: &str = "x-request-tag";

pub struct HttpBackend {
    client: Client,
    base_url: String,
    api_key: String,
}

impl std::fmt::Debug for HttpBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpBackend")
            .field("base_url", &self.base_url)
            .field("has_api_key", &!self.api_key.is_empty())
            .finish()
    }
}

#[derive(Serialize)]
struct WireChatRequest<'a> {
    model: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireChatResponse {
    choices: Vec<WireChoice>,
    #[serde(default)]
    usage: Option<WireUsage>,
}

#[derive(Deserialize)]
struct WireChoice {
    message: WireMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Deserialize)]
struct WireMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct WireUsage {
    #[serde(default)]
    prompt_tokens: u32,
    #[serde(default)]
    completion_tokens: u32,
    #[serde(default)]
    total_tokens: u32,
}

#[derive(Serialize)]
struct WireEmbeddingRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct WireEmbeddingResponse {
    data: Vec<WireEmbedding>,
}

#[derive(Deserialize)]
struct WireEmbedding {
    embedding: Vec<f64>,
    #[serde(default)]
    index: Option<usize>,
}

impl HttpBackend {
    pub fn new(base_url: &str, api_key: String, timeout: Duration) -> Result<Self, LlmError> {
        let client = Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| LlmError::Config(format!("failed to build HTTP client: {e}")))?;
        Ok(Self {
            client,
            base_url: base_url.trim_end_matches('/').to_owned(),
            api_key,
        })
    }

    fn post<B: Serialize>(&self, path: &str, tag: &str, body: &B) -> Result<String, LlmError> {
        let url = format!("{}/{}", self.base_url, path);
        let response = self
            .client
            .post(&url)
            .bearer_auth(&self.api_key)
            .header(REQUEST_TAG_HEADER, tag)
            .json(body)
            .send()
            .map_err(|e| {
                if e.is_timeout() {
                    LlmError::Timeout(e.to_string())
                } else {
                    LlmError::Network(e.to_string())
                }
            })?;
        let status = response.status();
        let text = response.text().map_err(|e| LlmError::Network(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::HttpStatus {
                status: status.as_u16(),
                body: text.chars().take(500).collect(),
            });
        }
        Ok(text)
    }
}

impl Backend for HttpBackend {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let body = WireChatRequest {
            model: &request.model_name,
            messages: &request.messages,
            temperature: request.temperature,
            max_tokens: request.max_tokens,
        };
        let text = self.post("chat/completions", &request.request_tag, &body)?;
        parse_chat_response(&text)
    }

    fn embed(&self, model_name: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, LlmError> {
        let body = WireEmbeddingRequest {
            model: model_name,
            input: texts,
        };
        let text = self.post("embeddings", "embed", &body)?;
        parse_embedding_response(&text, texts.len())
    }
}

pub(crate) fn parse_chat_response(text: &str) -> Result<ChatResponse, LlmError> {
    let wire: WireChatResponse = serde_json::from_str(text).map_err(|e| LlmError::MalformedPayload(e.to_string()))?;
    let choice = wire
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::MalformedPayload("no choices in response".into()))?;
    let finish_reason = FinishReason::from_wire(choice.finish_reason.as_deref());
    let content = match (choice.message.content, finish_reason) {
        (Some(c), _) => c,
        (None, FinishReason::Stop) => {
            return Err(LlmError::MalformedPayload(
                "stop response without message content".into(),
            ))
        }
        (None, _) => String::new(),
    };
    let usage = wire
        .usage
        .map(|u| Usage {
            prompt_tokens: u.prompt_tokens,
            completion_tokens: u.completion_tokens,
            total_tokens: u.total_tokens,
        })
        .unwrap_or_default();
    Ok(ChatResponse {
        content,
        finish_reason,
        usage,
        cached: false,
    })
}

pub(crate) fn parse_embedding_response(text: &str, expected: usize) -> Result<Vec<Vec<f64>>, LlmError> {
    let wire: WireEmbeddingResponse =
        serde_json::from_str(text).map_err(|e| LlmError::MalformedPayload(e.to_string()))?;
    if wire.data.len() != expected {
        return Err(LlmError::MalformedPayload(format!(
            "expected {expected} embeddings, got {}",
            wire.data.len()
        )));
    }
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; expected];
    for (pos, item) in wire.data.into_iter().enumerate() {
        let idx = item.index.unwrap_or(pos);
        let slot = slots
            .get_mut(idx)
            .ok_or_else(|| LlmError::MalformedPayload(format!("embedding index {idx} out of range")))?;
        if slot.is_some() {
            return Err(LlmError::MalformedPayload(format!("duplicate embedding index {idx}")));
        }
        *slot = Some(item.embedding);
    }
    Ok(slots.into_iter().map(|s| s.expect("all slots filled")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_standard_chat_body() {
        let body = r#"{"id":"x","choices":[{"index":0,"message":{"role":"assistant","content":"hello"},"finish_reason":"stop"}],"usage":{"prompt_tokens":3,"completion_tokens":1,"total_tokens":4}}"#;
        let r = parse_chat_response(body).unwrap();
        assert_eq!(r.content, "hello");
        assert_eq!(r.finish_reason, FinishReason::Stop);
        assert_eq!(r.usage.total_tokens, 4);
    }

    #[test]
    fn rejects_malformed_chat_bodies() {
        assert!(matches!(parse_chat_response("{}"), Err(LlmError::MalformedPayload(_))));
        assert!(matches!(
            parse_chat_response(r#"{"choices":[]}"#),
            Err(LlmError::MalformedPayload(_))
        ));
        assert!(matches!(
            parse_chat_response(r#"{"choices":[{"message":{},"finish_reason":"stop"}]}"#),
            Err(LlmError::MalformedPayload(_))
        ));
    }

    #[test]
    fn embeddings_are_reordered_by_index() {
        let body = r#"{"data":[{"index":1,"embedding":[0.0,1.0]},{"index":0,"embedding":[1.0,0.0]}]}"#;
        let v = parse_embedding_response(body, 2).unwrap();
        assert_eq!(v, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(parse_embedding_response(body, 3).is_err());
    }
}
