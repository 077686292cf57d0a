use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::metrics::{cosine_similarity, rouge, RougeVariant, ScorePair};
use super::EvalError;
use crate::corpus::{DomainLabel, NewsArticle};
use crate::discussion::{ComprehensionResponse, Condition, Discussion, DiscussionError};
use crate::llm::Provider;
use crate::memory::AgentProfile;
use crate::supplement::{SupplementKind, SupplementaryMaterial};

/// Scores for one article segment. `fallback` marks segments the reader did
/// not address separately, scored from the whole response instead.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentScore {
    #[serde(flatten)]
    pub scores: ScorePair<f64>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResult {
    pub agent_id: String,
    pub article_id: String,
    pub condition: Condition,
    pub whole_article: ScorePair<f64>,
    pub per_segment: BTreeMap<DomainLabel, SegmentScore>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Treatment {
    Vanilla,
    Discussion,
}

impl Treatment {
    pub const ALL: [Treatment; 2] = [Treatment::Vanilla, Treatment::Discussion];

    pub fn condition(self) -> Condition {
        match self {
            Treatment::Vanilla => Condition::Vanilla,
            Treatment::Discussion => Condition::Discussion,
        }
    }

    pub fn as_str(self) -> &'static str {
        self.condition().as_str()
    }
}

/// Change in whole-article cosine of a treated reading over the reading of
/// the article alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRecord {
    pub agent_id: String,
    pub article_id: String,
    pub condition: Treatment,
    pub delta_cosine: f64,
}

/// Control-group reading. Without a supplement the prompt is the agent's
/// independent-reading prompt, so the control reader and its experimental
/// counterpart see exactly the same input.
pub fn control_read(
    discussion: &Discussion<'_>,
    agent: &AgentProfile,
    article: &NewsArticle,
    supplement: Option<&SupplementaryMaterial>,
) -> Result<ComprehensionResponse, DiscussionError> {
    match supplement {
        None => discussion.read(agent, article, Condition::Original, None),
        Some(s) => {
            if s.article_id != article.id {
                return Err(DiscussionError::Precondition(format!(
                    "supplement is for `{}`, article is `{}`",
                    s.article_id, article.id
                )));
            }
            let condition = match s.kind {
                SupplementKind::Vanilla => Condition::Vanilla,
                SupplementKind::Discussion => Condition::Discussion,
            };
            discussion.read(agent, article, condition, Some(&s.full_text))
        }
    }
}

/// Scores a reading against the article: embedding cosine and ROUGE, for the
/// whole text and for every segment.
pub fn score_response(
    response: &ComprehensionResponse,
    article: &NewsArticle,
    embedder: &Provider,
    variant: RougeVariant,
) -> Result<EvaluationResult, EvalError> {
    if response.article_id != article.id {
        return Err(EvalError::Mismatch(format!(
            "response is for `{}`, article is `{}`",
            response.article_id, article.id
        )));
    }
    if response.whole_text.trim().is_empty() || article.body.trim().is_empty() {
        return Err(EvalError::Precondition("response and article must be non-empty".into()));
    }
    let labels = article.segment_labels();
    let mut pairs: Vec<(Option<DomainLabel>, String, String, bool)> =
        vec![(None, response.whole_text.clone(), article.body.clone(), false)];
    for label in labels {
        let reference = article.segment_text(&label).unwrap_or_default();
        let (candidate, fallback) = match response.per_segment_texts.get(&label) {
            Some(t) => (t.clone(), false),
            None => (response.whole_text.clone(), true),
        };
        pairs.push((Some(label), candidate, reference, fallback));
    }

    let mut texts: Vec<String> = Vec::new();
    for (_, c, r, _) in &pairs {
        for t in [c, r] {
            if !texts.contains(t) {
                texts.push(t.clone());
            }
        }
    }
    let vectors = embedder.embed(&texts)?;
    let by_text: HashMap<&str, &[f64]> = texts
        .iter()
        .map(String::as_str)
        .zip(vectors.iter().map(|v| v.values.as_slice()))
        .collect();

    let mut whole = None;
    let mut per_segment = BTreeMap::new();
    for (label, candidate, reference, fallback) in &pairs {
        let cosine = cosine_similarity(by_text[candidate.as_str()], by_text[reference.as_str()])?;
        let pair = ScorePair::new(cosine, rouge(variant, candidate, reference));
        match label {
            None => whole = Some(pair),
            Some(l) => {
                per_segment.insert(
                    l.clone(),
                    SegmentScore {
                        scores: pair,
                        fallback: *fallback,
                    },
                );
            }
        }
    }
    Ok(EvaluationResult {
        agent_id: response.agent_id.clone(),
        article_id: article.id.clone(),
        condition: response.condition,
        whole_article: whole.expect("whole-article pair is first"),
        per_segment,
    })
}

pub fn improvement(original: &EvaluationResult, treated: &EvaluationResult) -> Result<ImprovementRecord, EvalError> {
    if original.agent_id != treated.agent_id || original.article_id != treated.article_id {
        return Err(EvalError::Mismatch(format!(
            "cannot compare {}/{} with {}/{}",
            original.agent_id, original.article_id, treated.agent_id, treated.article_id
        )));
    }
    if original.condition != Condition::Original {
        return Err(EvalError::Mismatch(format!(
            "baseline must be the original condition, got {}",
            original.condition
        )));
    }
    let condition = match treated.condition {
        Condition::Vanilla => Treatment::Vanilla,
        Condition::Discussion => Treatment::Discussion,
        Condition::Original => return Err(EvalError::Mismatch("treated result has the original condition".into())),
    };
    Ok(ImprovementRecord {
        agent_id: original.agent_id.clone(),
        article_id: original.article_id.clone(),
        condition,
        delta_cosine: treated.whole_article.cosine - original.whole_article.cosine,
    })
}
