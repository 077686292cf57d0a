//! Minimal OpenAI-compatible HTTP endpoint over any [`Backend`], bound to a
//! loopback port. Used to exercise the real HTTP client in record mode
//! without leaving the machine.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::Deserialize;
use serde_json::json;

use super::http::REQUEST_TAG_HEADER;
use super::{Backend, ChatRequest, FinishReason, LlmError, Message};

#[derive(Deserialize)]
struct ChatBody {
    model: String,
    messages: Vec<Message>,
    #[serde(default)]
    temperature: f64,
    #[serde(default = "one")]
    max_tokens: u32,
}

fn one() -> u32 {
    1
}

#[derive(Deserialize)]
struct EmbeddingBody {
    model: String,
    input: Vec<String>,
}

struct Shared {
    backend: Arc<dyn Backend>,
    stop: AtomicBool,
    requests: AtomicUsize,
    fail_next: AtomicUsize,
}

/// Serves `POST /v1/chat/completions` and `POST /v1/embeddings` until
/// dropped. Requests without a bearer token get 401.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start(backend: Arc<dyn Backend>) -> io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            backend,
            stop: AtomicBool::new(false),
            requests: AtomicUsize::new(0),
            fail_next: AtomicUsize::new(0),
        });
        let worker = Arc::clone(&shared);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if worker.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let conn = Arc::clone(&worker);
                std::thread::spawn(move || {
                    let _ = serve(stream, &conn);
                });
            }
        });
        Ok(Self {
            addr,
            shared,
            handle: Some(handle),
        })
    }

    /// Base URL to put in `ProviderConfig::base_url`.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Requests received so far, including rejected ones.
    pub fn requests(&self) -> usize {
        self.shared.requests.load(Ordering::SeqCst)
    }

    /// Answer the next `n` requests with HTTP 503.
    pub fn fail_next(&self, n: usize) {
        self.shared.fail_next.store(n, Ordering::SeqCst);
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        // Unblock the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

struct HttpRequest {
    method: String,
    path: String,
    headers: Vec<(String, String)>,
    body: Vec<u8>,
}

impl HttpRequest {
    fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

fn read_request(stream: &TcpStream) -> io::Result<HttpRequest> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut parts = line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_owned();
    let path = parts.next().unwrap_or_default().to_owned();
    let mut headers = Vec::new();
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h)? == 0 {
            break;
        }
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            headers.push((k.trim().to_owned(), v.trim().to_owned()));
        }
    }
    let len = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;
    Ok(HttpRequest {
        method,
        path,
        headers,
        body,
    })
}

fn write_response(mut stream: &TcpStream, status: u16, body: &str) -> io::Result<()> {
    let reason = match status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        404 => "Not Found",
        429 => "Too Many Requests",
        _ => "Error",
    };
    write!(
        stream,
        "HTTP/1.1 {status} {reason}\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}

fn error_body(message: &str) -> String {
    json!({ "error": { "message": message } }).to_string()
}

fn serve(stream: TcpStream, shared: &Shared) -> io::Result<()> {
    let request = read_request(&stream)?;
    if shared.stop.load(Ordering::SeqCst) {
        return Ok(());
    }
    shared.requests.fetch_add(1, Ordering::SeqCst);
    let injected = shared
        .fail_next
        .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
        .is_ok();
    if injected {
        return write_response(&stream, 503, &error_body("injected failure"));
    }
    if !request
        .header("authorization")
        .is_some_and(|a| a.starts_with("Bearer "))
    {
        return write_response(&stream, 401, &error_body("missing bearer token"));
    }
    let (status, body) = match (request.method.as_str(), request.path.as_str()) {
        ("POST", "/v1/chat/completions") => chat(shared, &request),
        ("POST", "/v1/embeddings") => embeddings(shared, &request),
        _ => (404, error_body("no such route")),
    };
    write_response(&stream, status, &body)
}

fn backend_error(e: LlmError) -> (u16, String) {
    match e {
        LlmError::HttpStatus { status, body } => (status, error_body(&body)),
        other => (500, error_body(&other.to_string())),
    }
}

fn chat(shared: &Shared, request: &HttpRequest) -> (u16, String) {
    let body: ChatBody = match serde_json::from_slice(&request.body) {
        Ok(b) => b,
        Err(e) => return (400, error_body(&e.to_string())),
    };
    let chat_request = ChatRequest {
        model_name: body.model,
        messages: body.messages,
        temperature: body.temperature,
        max_tokens: body.max_tokens,
        request_tag: request.header(REQUEST_TAG_HEADER).unwrap_or_default().to_owned(),
    };
    match shared.backend.chat(&chat_request) {
        Ok(r) => {
            let finish = match r.finish_reason {
                FinishReason::Stop => "stop",
                FinishReason::Length => "length",
                FinishReason::ContentFilter => "content_filter",
                FinishReason::Other => "other",
            };
            let payload = json!({
                "object": "chat.completion",
                "model": chat_request.model_name,
                "choices": [{
                    "index": 0,
                    "message": { "role": "assistant", "content": r.content },
                    "finish_reason": finish,
                }],
                "usage": {
                    "prompt_tokens": r.usage.prompt_tokens,
                    "completion_tokens": r.usage.completion_tokens,
                    "total_tokens": r.usage.total_tokens,
                },
            });
            (200, payload.to_string())
        }
        Err(e) => backend_error(e),
    }
}

fn embeddings(shared: &Shared, request: &HttpRequest) -> (u16, String) {
    let body: EmbeddingBody = match serde_json::from_slice(&request.body) {
        Ok(b) => b,
        Err(e) => return (400, error_body(&e.to_string())),
    };
    match shared.backend.embed(&body.model, &body.input) {
        Ok(vectors) => {
            // Reverse order on the wire so clients must honour `index`.
            let data: Vec<_> = vectors
                .into_iter()
                .enumerate()
                .rev()
                .map(|(i, v)| json!({ "object": "embedding", "index": i, "embedding": v }))
                .collect();
            (
                200,
                json!({ "object": "list", "data": data, "model": body.model }).to_string(),
            )
        }
        Err(e) => backend_error(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::simulated::SimulatedBackend;
    use crate::llm::HttpBackend;
    use std::time::Duration;

    #[test]
    fn http_roundtrip_through_the_real_client() {
        let server = MockServer::start(Arc::new(SimulatedBackend::new(16))).unwrap();
        let client = HttpBackend::new(&server.base_url(), "k".into(), Duration::from_secs(5)).unwrap();
        let texts = vec!["alpha beta".to_owned(), "gamma".to_owned()];
        let v = client.embed("m", &texts).unwrap();
        assert_eq!(v, SimulatedBackend::new(16).embed("m", &texts).unwrap());

        let req = crate::llm::ProviderConfig::default().chat_request(
            vec![Message::user("<article title=\"t\">\n</article>")],
            "supplement:vanilla:a",
        );
        let r = client.chat(&req).unwrap();
        assert_eq!(r.content, SimulatedBackend::new(16).respond(&req).unwrap());
        assert_eq!(server.requests(), 2);
    }

    #[test]
    fn injected_failures_and_auth() {
        let server = MockServer::start(Arc::new(SimulatedBackend::default())).unwrap();
        server.fail_next(1);
        let client = HttpBackend::new(&server.base_url(), "k".into(), Duration::from_secs(5)).unwrap();
        let err = client.embed("m", &["x".into()]).unwrap_err();
        assert!(matches!(err, LlmError::HttpStatus { status: 503, .. }));
        assert!(client.embed("m", &["x".into()]).is_ok());
    }
}
