//! Control-group scoring and the quantitative analyses over it.

mod experiment;
pub mod metrics;
pub mod records;
mod scoring;
pub mod stats;

use thiserror::Error;

pub use experiment::{
    iteration_sweep, prepare_agents, run_experiment, ArticleFailure, ArticleRun, ExperimentOutput, ExperimentSettings,
    SweepOutput, SweepPoint, TTestRow, DEFAULT_ALPHA, DEFAULT_ROUNDS,
};
pub use scoring::{
    control_read, improvement, score_response, EvaluationResult, ImprovementRecord, SegmentScore, Treatment,
};

use crate::discussion::DiscussionError;
use crate::llm::LlmError;
use crate::memory::MemoryError;
use metrics::MetricError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("mismatched inputs: {0}")]
    Mismatch(String),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Discussion(#[from] DiscussionError),
    #[error("every article failed ({} failures)", .0.len())]
    AllArticlesFailed(Vec<ArticleFailure>),
}
