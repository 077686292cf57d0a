use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{ChatRequest, Message};

#[derive(Serialize)]
struct ChatKeyMaterial<'a> {
    kind: &'static str,
    model_name: &'a str,
    messages: &'a [Message],
    temperature: f64,
    max_tokens: u32,
}

#[derive(Serialize)]
struct EmbeddingKeyMaterial<'a> {
    kind: &'static str,
    model_name: &'a str,
    input: &'a str,
}

fn digest<T: Serialize>(material: &T) -> String {
    // serde_json emits struct fields in declaration order and formats floats
    // with ryu, so the bytes are platform independent.
    let bytes = serde_json::to_vec(material).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Digest over model, messages, temperature and max_tokens. The request tag is
/// excluded.
pub fn request_key(request: &ChatRequest) -> String {
    digest(&ChatKeyMaterial {
        kind: "chat",
        model_name: &request.model_name,
        messages: &request.messages,
        temperature: request.temperature,
        max_tokens: request.max_tokens,
    })
}

/// Digest for a single embedding input.
pub fn embedding_key(model_name: &str, text: &str) -> String {
    digest(&EmbeddingKeyMaterial {
        kind: "embedding",
        model_name,
        input: text,
    })
}
