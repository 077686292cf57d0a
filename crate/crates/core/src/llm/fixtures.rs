use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse, LlmError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FixtureKind {
    Chat {
        request: ChatRequest,
        response: ChatResponse,
    },
    Embedding {
        model_name: String,
        input: String,
        values: Vec<f64>,
    },
}

/// One recorded provider exchange. Stored as a single UTF-8 JSON file whose
/// name is the request key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub key: String,
    #[serde(flatten)]
    pub exchange: FixtureKind,
}

/// Directory of fixture records, one file per key.
#[derive(Debug, Clone)]
pub struct FixtureStore {
    dir: PathBuf,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    pub fn load(&self, key: &str) -> Result<Option<FixtureRecord>, LlmError> {
        let path = self.path_for(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(LlmError::Fixture {
                    path,
                    message: e.to_string(),
                })
            }
        };
        let record: FixtureRecord = serde_json::from_str(&text).map_err(|e| LlmError::Fixture {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if record.key != key {
            return Err(LlmError::Fixture {
                path,
                message: format!("record key {} does not match file name", record.key),
            });
        }
        Ok(Some(record))
    }

    /// Writes to a temporary sibling and renames over the target, so readers
    /// never observe a half-written record.
    pub fn store(&self, record: &FixtureRecord) -> Result<(), LlmError> {
        let io_err = |path: &Path, e: std::io::Error| LlmError::Fixture {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        fs::create_dir_all(&self.dir).map_err(|e| io_err(&self.dir, e))?;
        let target = self.path_for(&record.key);
        let mut body = serde_json::to_string_pretty(record).expect("fixture serializes");
        body.push('\n');
        let tmp = self.dir.join(format!(
            ".{}.{}.tmp",
            record.key,
            std::process::id() as u64 ^ thread_token()
        ));
        let mut file = fs::File::create(&tmp).map_err(|e| io_err(&tmp, e))?;
        file.write_all(body.as_bytes()).map_err(|e| io_err(&tmp, e))?;
        file.sync_all().map_err(|e| io_err(&tmp, e))?;
        drop(file);
        fs::rename(&tmp, &target).map_err(|e| io_err(&target, e))
    }

    /// Keys of all records currently in the store, sorted.
    pub fn keys(&self) -> Result<Vec<String>, LlmError> {
        let entries = match fs::read_dir(&self.dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => {
                return Err(LlmError::Fixture {
                    path: self.dir.clone(),
                    message: e.to_string(),
                })
            }
        };
        let mut keys: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| e.file_name().into_string().ok())
            .filter(|n| !n.starts_with('.'))
            .collect();
        keys.sort();
        Ok(keys)
    }
}

fn thread_token() -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    std::thread::current().id().hash(&mut h);
    h.finish()
}
