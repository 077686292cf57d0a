//! Experimental-group protocol: every agent reads the article on its own,
//! then the group discusses it for a fixed number of rounds. After each round
//! a neutral summarize call condenses what was said; those summaries are the
//! discussion's long-term memory and feed the supplement generator.

mod engine;
mod gaps;
mod parse;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use engine::render_summaries;
pub use engine::{Discussion, DiscussionSettings};
pub use gaps::{extract_gaps, normalize_question, Gap};
pub use parse::{parse_comprehension, parse_summary, parse_utterance};

use crate::corpus::DomainLabel;
use crate::llm::LlmError;
use crate::memory::{MemoryError, TemplateError};

/// What the reader saw alongside the article.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Original,
    Vanilla,
    Discussion,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Original, Condition::Vanilla, Condition::Discussion];

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Original => "original",
            Condition::Vanilla => "vanilla",
            Condition::Discussion => "discussion",
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Condition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(Self::Original),
            "vanilla" => Ok(Self::Vanilla),
            "discussion" => Ok(Self::Discussion),
            other => Err(format!("unknown condition `{other}`")),
        }
    }
}

/// A question with the domain it is addressed to, when one was given.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainQuestion {
    pub asked_of: Option<DomainLabel>,
    pub text: String,
}

/// An agent's stated understanding of an article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComprehensionResponse {
    pub agent_id: String,
    pub article_id: String,
    pub condition: Condition,
    pub whole_text: String,
    pub per_segment_texts: BTreeMap<DomainLabel, String>,
    pub declared_questions: Vec<DomainQuestion>,
    pub declared_uncertainties: Vec<String>,
}

/// Stable reference to a question on record: `I<n>` for the n-th question of
/// the initial readings, `R<r>Q<k>` for the k-th question asked in round r.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum QuestionRef {
    Initial(usize),
    Round { round: usize, index: usize },
}

impl QuestionRef {
    /// Round in which the question was asked; `None` for initial readings.
    pub fn round(&self) -> Option<usize> {
        match self {
            QuestionRef::Initial(_) => None,
            QuestionRef::Round { round, .. } => Some(*round),
        }
    }
}

impl fmt::Display for QuestionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QuestionRef::Initial(i) => write!(f, "I{i}"),
            QuestionRef::Round { round, index } => write!(f, "R{round}Q{index}"),
        }
    }
}

impl FromStr for QuestionRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim().trim_matches(|c| c == '[' || c == ']').to_ascii_uppercase();
        let bad = || format!("`{s}` is not a question reference");
        if let Some(rest) = t.strip_prefix('I') {
            return rest.parse().map(QuestionRef::Initial).map_err(|_| bad());
        }
        let rest = t.strip_prefix('R').ok_or_else(bad)?;
        let (round, index) = rest.split_once('Q').ok_or_else(bad)?;
        Ok(QuestionRef::Round {
            round: round.parse().map_err(|_| bad())?,
            index: index.parse().map_err(|_| bad())?,
        })
    }
}

impl From<QuestionRef> for String {
    fn from(r: QuestionRef) -> Self {
        r.to_string()
    }
}

impl TryFrom<String> for QuestionRef {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AskedQuestion {
    pub asked_of: DomainLabel,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clarification {
    pub answers: QuestionRef,
    pub text: String,
}

/// One agent's turn in a round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utterance {
    pub agent_id: String,
    pub round_index: usize,
    pub text: String,
    pub questions: Vec<AskedQuestion>,
    pub clarifications: Vec<Clarification>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundSummary {
    pub round_index: usize,
    pub key_points: String,
    pub open_questions: Vec<String>,
    pub clarifications_given: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscussionRound {
    pub utterances: Vec<Utterance>,
    pub summary: RoundSummary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscussionTranscript {
    pub article_id: String,
    pub initial_responses: Vec<ComprehensionResponse>,
    pub rounds: Vec<DiscussionRound>,
    pub n_rounds_config: usize,
}

/// A question on record with where it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordedQuestion<'a> {
    pub reference: QuestionRef,
    pub asked_by: &'a str,
    pub asked_of: Option<&'a DomainLabel>,
    pub text: &'a str,
}

impl DiscussionTranscript {
    pub fn new(article_id: impl Into<String>, n_rounds: usize) -> Self {
        Self {
            article_id: article_id.into(),
            initial_responses: Vec::new(),
            rounds: Vec::new(),
            n_rounds_config: n_rounds,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.rounds.len() == self.n_rounds_config
    }

    /// Every question asked so far, in record order.
    pub fn questions(&self) -> Vec<RecordedQuestion<'_>> {
        let mut out = Vec::new();
        let mut i = 0;
        for r in &self.initial_responses {
            for q in &r.declared_questions {
                out.push(RecordedQuestion {
                    reference: QuestionRef::Initial(i),
                    asked_by: &r.agent_id,
                    asked_of: q.asked_of.as_ref(),
                    text: &q.text,
                });
                i += 1;
            }
        }
        for (round, dr) in self.rounds.iter().enumerate() {
            out.extend(round_questions(round, &dr.utterances));
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("transcript serializes");
        s.push('\n');
        s
    }

    pub fn summaries(&self) -> impl Iterator<Item = &RoundSummary> {
        self.rounds.iter().map(|r| &r.summary)
    }
}

/// Questions of one round, numbered in utterance order.
pub(crate) fn round_questions(round: usize, utterances: &[Utterance]) -> Vec<RecordedQuestion<'_>> {
    let mut out = Vec::new();
    let mut index = 0;
    for u in utterances {
        for q in &u.questions {
            out.push(RecordedQuestion {
                reference: QuestionRef::Round { round, index },
                asked_by: &u.agent_id,
                asked_of: Some(&q.asked_of),
                text: &q.text,
            });
            index += 1;
        }
    }
    out
}

#[derive(Debug, Error)]
pub enum DiscussionError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error(transparent)]
    Memory(#[from] MemoryError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("unparseable {what} response: {reason}")]
    Unparseable { what: String, reason: String, raw: String },
    #[error("discussion stopped after {} completed rounds: {source}", partial.rounds.len())]
    Interrupted {
        partial: Box<DiscussionTranscript>,
        #[source]
        source: Box<DiscussionError>,
    },
}
