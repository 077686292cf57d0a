use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use tracing::{debug, warn};

use super::{
    embedding_key, request_key, Backend, ChatRequest, ChatResponse, EmbeddingVector, FixtureKind, FixtureRecord,
    FixtureStore, HttpBackend, LlmError, ProviderConfig, ProviderMode,
};

const EMBED_BATCH: usize = 64;

/// A chat request as seen by the provider, kept for prompt inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedRequest {
    pub key: String,
    pub request: ChatRequest,
}

/// Counting semaphore capping in-flight network calls.
#[derive(Debug)]
struct Limiter {
    available: Mutex<usize>,
    cond: Condvar,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn new(n: usize) -> Self {
        Self {
            available: Mutex::new(n.max(1)),
            cond: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.cond.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.available.lock().unwrap_or_else(|e| e.into_inner());
        *n += 1;
        self.0.cond.notify_one();
    }
}

/// Shareable handle over a backend, a fixture store and a response cache.
pub struct Provider {
    config: ProviderConfig,
    backend: Option<Arc<dyn Backend>>,
    fixtures: Option<FixtureStore>,
    chat_cache: Mutex<HashMap<String, ChatResponse>>,
    embed_cache: Mutex<HashMap<String, Vec<f64>>>,
    limiter: Limiter,
    log: Mutex<Vec<LoggedRequest>>,
    network_calls: AtomicUsize,
}

impl std::fmt::Debug for Provider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Provider")
            .field("mode", &self.config.mode)
            .field("fixtures", &self.fixtures.as_ref().map(|s| s.dir().to_path_buf()))
            .field("has_backend", &self.backend.is_some())
            .finish()
    }
}

impl Provider {
    /// Builds a provider from configuration alone. Live and record modes read
    /// the API key from the configured environment variable.
    pub fn from_config(config: ProviderConfig) -> Result<Self, LlmError> {
        config.validate()?;
        let backend: Option<Arc<dyn Backend>> = match config.mode {
            ProviderMode::Replay => None,
            ProviderMode::Live | ProviderMode::Record => {
                let key = std::env::var(&config.api_key_env_name)
                    .ok()
                    .filter(|k| !k.is_empty())
                    .ok_or_else(|| LlmError::MissingApiKey(config.api_key_env_name.clone()))?;
                Some(Arc::new(HttpBackend::new(
                    &config.base_url,
                    key,
                    Duration::from_secs(config.timeout_secs),
                )?))
            }
        };
        Ok(Self::assemble(config, backend))
    }

    /// Builds a provider over an explicit backend (used by tests and the
    /// simulated endpoint). Replay mode ignores the backend.
    pub fn with_backend(config: ProviderConfig, backend: Arc<dyn Backend>) -> Result<Self, LlmError> {
        config.validate()?;
        let backend = match config.mode {
            ProviderMode::Replay => None,
            _ => Some(backend),
        };
        Ok(Self::assemble(config, backend))
    }

    fn assemble(config: ProviderConfig, backend: Option<Arc<dyn Backend>>) -> Self {
        let fixtures = config.fixture_dir.clone().map(FixtureStore::new);
        let limiter = Limiter::new(config.max_in_flight);
        Self {
            config,
            backend,
            fixtures,
            chat_cache: Mutex::new(HashMap::new()),
            embed_cache: Mutex::new(HashMap::new()),
            limiter,
            log: Mutex::new(Vec::new()),
            network_calls: AtomicUsize::new(0),
        }
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    /// Every chat request issued so far, in issue order.
    pub fn request_log(&self) -> Vec<LoggedRequest> {
        self.log.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    /// Number of backend calls attempted (including failed attempts).
    pub fn network_calls(&self) -> usize {
        self.network_calls.load(Ordering::SeqCst)
    }

    pub fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        request.validate()?;
        let key = request_key(request);
        self.log.lock().unwrap_or_else(|e| e.into_inner()).push(LoggedRequest {
            key: key.clone(),
            request: request.clone(),
        });

        if self.config.cache {
            if let Some(hit) = self.chat_cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
                debug!(tag = %request.request_tag, "chat cache hit");
                let mut r = hit.clone();
                r.cached = true;
                return Ok(r);
            }
        }

        let response = match self.config.mode {
            ProviderMode::Replay => self.replay_chat(&key, request)?,
            ProviderMode::Live => self.with_retry(|b| b.chat(request))?,
            ProviderMode::Record => {
                let response = self.with_retry(|b| b.chat(request))?;
                self.store()?.store(&FixtureRecord {
                    key: key.clone(),
                    exchange: FixtureKind::Chat {
                        request: request.clone(),
                        response: response.clone(),
                    },
                })?;
                response
            }
        };

        if self.config.cache {
            self.chat_cache
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .insert(key, response.clone());
        }
        Ok(response)
    }

    /// Embeds each text with the configured embedding model. Output order
    /// matches input order; all vectors share one dimension.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, LlmError> {
        if texts.is_empty() {
            return Err(LlmError::InvalidRequest("embedding batch is empty".into()));
        }
        if let Some(i) = texts.iter().position(|t| t.trim().is_empty()) {
            return Err(LlmError::InvalidRequest(format!("embedding input {i} is empty")));
        }
        let model = self.config.embedding_model.as_str();
        let keys: Vec<String> = texts.iter().map(|t| embedding_key(model, t)).collect();

        let mut found: HashMap<String, Vec<f64>> = HashMap::new();
        if self.config.cache {
            let cache = self.embed_cache.lock().unwrap_or_else(|e| e.into_inner());
            for k in &keys {
                if let Some(v) = cache.get(k) {
                    found.insert(k.clone(), v.clone());
                }
            }
        }

        let mut missing: Vec<(String, String)> = Vec::new();
        for (k, t) in keys.iter().zip(texts) {
            if found.contains_key(k) || missing.iter().any(|(mk, _)| mk == k) {
                continue;
            }
            missing.push((k.clone(), t.clone()));
        }

        match self.config.mode {
            ProviderMode::Replay => {
                let store = self.store()?;
                for (k, _) in &missing {
                    match store.load(k)? {
                        Some(FixtureRecord {
                            exchange: FixtureKind::Embedding { values, .. },
                            ..
                        }) => {
                            found.insert(k.clone(), values);
                        }
                        Some(_) => {
                            return Err(LlmError::Fixture {
                                path: store.path_for(k),
                                message: "expected an embedding record".into(),
                            })
                        }
                        None => {
                            return Err(LlmError::MissingFixture {
                                key: k.clone(),
                                tag: "embed".into(),
                            })
                        }
                    }
                }
            }
            ProviderMode::Live | ProviderMode::Record => {
                for chunk in missing.chunks(EMBED_BATCH) {
                    let inputs: Vec<String> = chunk.iter().map(|(_, t)| t.clone()).collect();
                    let vectors = self.with_retry(|b| b.embed(model, &inputs))?;
                    if vectors.len() != inputs.len() {
                        return Err(LlmError::MalformedPayload(format!(
                            "expected {} embeddings, got {}",
                            inputs.len(),
                            vectors.len()
                        )));
                    }
                    for ((k, t), v) in chunk.iter().zip(vectors) {
                        if self.config.mode == ProviderMode::Record {
                            self.store()?.store(&FixtureRecord {
                                key: k.clone(),
                                exchange: FixtureKind::Embedding {
                                    model_name: model.to_owned(),
                                    input: t.clone(),
                                    values: v.clone(),
                                },
                            })?;
                        }
                        found.insert(k.clone(), v);
                    }
                }
            }
        }

        let mut out = Vec::with_capacity(texts.len());
        for k in &keys {
            let values = found.get(k).expect("every key resolved").clone();
            let v = EmbeddingVector::new(values, model)?;
            if let Some(first) = out.first().map(|f: &EmbeddingVector| f.dim) {
                if v.dim != first {
                    return Err(LlmError::DimensionMismatch {
                        expected: first,
                        got: v.dim,
                    });
                }
            }
            out.push(v);
        }

        if self.config.cache {
            let mut cache = self.embed_cache.lock().unwrap_or_else(|e| e.into_inner());
            for (k, v) in keys.iter().zip(&out) {
                cache.entry(k.clone()).or_insert_with(|| v.values.clone());
            }
        }
        Ok(out)
    }

    /// Convenience wrapper for a single text.
    pub fn embed_one(&self, text: &str) -> Result<EmbeddingVector, LlmError> {
        Ok(self.embed(&[text.to_owned()])?.remove(0))
    }

    fn store(&self) -> Result<&FixtureStore, LlmError> {
        self.fixtures
            .as_ref()
            .ok_or_else(|| LlmError::Config("no fixture_dir configured".into()))
    }

    fn replay_chat(&self, key: &str, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let store = self.store()?;
        match store.load(key)? {
            Some(FixtureRecord {
                exchange: FixtureKind::Chat { response, .. },
                ..
            }) => Ok(ChatResponse {
                cached: false,
                ..response
            }),
            Some(_) => Err(LlmError::Fixture {
                path: store.path_for(key),
                message: "expected a chat record".into(),
            }),
            None => Err(LlmError::MissingFixture {
                key: key.to_owned(),
                tag: request.request_tag.clone(),
            }),
        }
    }

    fn with_retry<T>(&self, mut op: impl FnMut(&dyn Backend) -> Result<T, LlmError>) -> Result<T, LlmError> {
        let backend = self
            .backend
            .as_deref()
            .ok_or_else(|| LlmError::Config("no backend available in this mode".into()))?;
        let max = self.config.retry.max_attempts.max(1);
        let mut attempt = 0;
        loop {
            attempt += 1;
            let result = {
                let _permit = self.limiter.acquire();
                self.network_calls.fetch_add(1, Ordering::SeqCst);
                op(backend)
            };
            match result {
                Ok(v) => return Ok(v),
                Err(e) if e.is_retryable() && attempt < max => {
                    let wait = self.config.retry.backoff(attempt);
                    warn!(attempt, ?wait, error = %e, "retrying provider call");
                    std::thread::sleep(wait);
                }
                Err(e) if e.is_retryable() => {
                    return Err(LlmError::RetriesExhausted {
                        attempts: attempt,
                        last: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}
