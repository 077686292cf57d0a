//! Experiment configuration document (TOML). Relative paths are resolved
//! against the directory holding the document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DomainLabel, DomainSet, DEFAULT_DOMAINS};
use crate::discussion::DiscussionSettings;
use crate::evaluation::metrics::RougeVariant;
use crate::evaluation::{ExperimentSettings, DEFAULT_ALPHA, DEFAULT_ROUNDS};
use crate::llm::ProviderConfig;
use crate::memory::DEFAULT_RETRIEVAL_K;
use crate::reporting::DEFAULT_PRECISION;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus_path: PathBuf,
    pub agent_profile_paths: Vec<PathBuf>,
    #[serde(default = "default_domains")]
    pub domain_set: Vec<DomainLabel>,
    #[serde(default = "default_rounds")]
    pub n_rounds: usize,
    #[serde(default = "default_rounds")]
    pub max_rounds_sweep: usize,
    #[serde(default = "default_k")]
    pub retrieval_k: usize,
    #[serde(default)]
    pub rouge_variant: RougeVariant,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_true")]
    pub share_initial_readings: bool,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_run_id")]
    pub run_id: String,
    /// Articles processed in parallel; 0 means one per logical processor.
    #[serde(default)]
    pub jobs: usize,
    #[serde(default = "default_precision")]
    pub precision: usize,
    #[serde(default)]
    pub provider: ProviderConfig,
}

fn default_domains() -> Vec<DomainLabel> {
    DEFAULT_DOMAINS.iter().map(|d| DomainLabel::from(*d)).collect()
}
fn default_rounds() -> usize {
    DEFAULT_ROUNDS
}
fn default_k() -> usize {
    DEFAULT_RETRIEVAL_K
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_true() -> bool {
    true
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}
fn default_run_id() -> String {
    "run".into()
}
fn default_precision() -> usize {
    DEFAULT_PRECISION
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// Reads and parses `path`, resolving relative paths against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut config = Self::parse(&text).map_err(|message| ConfigError::Parse {
            path: path.to_path_buf(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.corpus_path);
        for p in &mut self.agent_profile_paths {
            resolve(base, p);
        }
        resolve(base, &mut self.output_dir);
        if let Some(d) = &mut self.provider.fixture_dir {
            resolve(base, d);
        }
    }

    /// Every problem found, without touching the file system.
    pub fn check(&self) -> Vec<String> {
        let mut issues = Vec::new();
        if self.n_rounds < 1 {
            issues.push("n_rounds must be >= 1".into());
        }
        if self.max_rounds_sweep < 1 {
            issues.push("max_rounds_sweep must be >= 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            issues.push(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.retrieval_k < 1 {
            issues.push("retrieval_k must be >= 1".into());
        }
        if self.agent_profile_paths.len() < 2 {
            issues.push(format!(
                "agent_profile_paths lists {} profile(s); a discussion needs at least two",
                self.agent_profile_paths.len()
            ));
        }
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id.starts_with('.') {
            issues.push(format!("run_id `{}` is not a plain directory name", self.run_id));
        }
        if let Err(e) = DomainSet::new(self.domain_set.clone()) {
            issues.push(format!("domain_set: {e}"));
        }
        if let Err(e) = self.provider.validate() {
            issues.push(format!("provider: {e}"));
        }
        issues
    }

    pub fn domains(&self) -> Result<DomainSet, String> {
        DomainSet::new(self.domain_set.clone()).map_err(|e| e.to_string())
    }

    pub fn settings(&self) -> ExperimentSettings {
        ExperimentSettings {
            n_rounds: self.n_rounds,
            alpha: self.alpha,
            rouge_variant: self.rouge_variant,
            discussion: DiscussionSettings {
                retrieval_k: self.retrieval_k,
                share_initial_readings: self.share_initial_readings,
            },
            jobs: self.jobs,
        }
    }

    /// Directory that receives this run's artifacts.
    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }

    /// The effective configuration with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
