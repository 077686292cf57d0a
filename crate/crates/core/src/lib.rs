//! Simulated multi-agent news comprehension.
//!
//! Agents with different backgrounds read a news article, discuss it over a
//! fixed number of rounds and surface their points of confusion. The
//! discussion drives supplementary material for the article, and a control
//! group of identical agents measures how much each supplement helps.

pub mod config;
pub mod corpus;
pub mod discussion;
pub mod evaluation;
pub mod layout;
pub mod llm;
pub mod memory;
pub mod pipeline;
pub mod reporting;
pub mod scalar;
pub mod supplement;

use num_rational::Ratio;

pub use config::ExperimentConfig;
pub use corpus::{Corpus, DomainLabel, DomainSet, NewsArticle, Segment};
pub use discussion::{ComprehensionResponse, Condition, DiscussionTranscript, Gap, RoundSummary, Utterance};
pub use evaluation::{EvaluationResult, ExperimentOutput, ImprovementRecord};
pub use llm::{Provider, ProviderConfig, ProviderMode};
pub use memory::{AgentProfile, MemoryStore};
pub use reporting::ReportTable;
pub use scalar::Scalar;
pub use supplement::SupplementaryMaterial;

/// Embedding-cosine and ROUGE scores in double precision.
pub type ScorePair = evaluation::metrics::ScorePair<f64>;
/// ROUGE precision, recall and F1 in double precision.
pub type RougeScore = evaluation::metrics::RougeScore<f64>;
/// ROUGE scores as exact ratios of token counts.
pub type ExactRougeScore = evaluation::metrics::RougeScore<Ratio<i64>>;
/// t-test outcome in double precision.
pub type TTestResult = evaluation::stats::TTestResult<f64>;
