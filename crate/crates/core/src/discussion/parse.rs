//! Parsers from model output into discussion records.

use std::collections::{BTreeMap, BTreeSet};

use tracing::warn;

use super::{
    AskedQuestion, Clarification, ComprehensionResponse, Condition, DiscussionError, DomainQuestion, QuestionRef,
    RoundSummary, Utterance,
};
use crate::corpus::{DomainSet, NewsArticle};
use crate::layout::{addressed, Layout};

fn unparseable(what: &str, reason: impl Into<String>, raw: &str) -> DiscussionError {
    DiscussionError::Unparseable {
        what: what.into(),
        reason: reason.into(),
        raw: raw.into(),
    }
}

fn required_body(layout: &Layout, name: &str, what: &str, raw: &str) -> Result<String, DiscussionError> {
    let body = layout
        .first(name)
        .ok_or_else(|| unparseable(what, format!("missing `## {name}` section"), raw))?
        .body
        .clone();
    if body.is_empty() {
        return Err(unparseable(what, format!("`## {name}` section is empty"), raw));
    }
    Ok(body)
}

/// Parses an independent or control reading. `## ANALYSIS` is required;
/// `## SEGMENT <domain>` sections for labels the article does not carry are
/// dropped.
pub fn parse_comprehension(
    raw: &str,
    agent_id: &str,
    article: &NewsArticle,
    domains: &DomainSet,
    condition: Condition,
) -> Result<ComprehensionResponse, DiscussionError> {
    const WHAT: &str = "reading";
    let layout = Layout::parse(raw);
    let whole_text = required_body(&layout, "ANALYSIS", WHAT, raw)?;
    let labels = article.segment_labels();
    let mut per_segment_texts = BTreeMap::new();
    for s in layout.all("SEGMENT") {
        match domains.resolve(&s.arg).filter(|d| labels.contains(d)) {
            Some(d) if !s.body.is_empty() => {
                per_segment_texts
                    .entry(d.clone())
                    .and_modify(|t: &mut String| {
                        t.push('\n');
                        t.push_str(&s.body);
                    })
                    .or_insert_with(|| s.body.clone());
            }
            Some(_) => {}
            None => warn!(agent = agent_id, label = %s.arg, "ignoring segment section for unknown label"),
        }
    }
    let declared_questions = layout
        .items("QUESTIONS")
        .into_iter()
        .map(|item| {
            let (target, text) = addressed(&item);
            DomainQuestion {
                asked_of: target.and_then(|t| domains.resolve(&t).cloned()),
                text,
            }
        })
        .filter(|q| !q.text.is_empty())
        .collect();
    Ok(ComprehensionResponse {
        agent_id: agent_id.into(),
        article_id: article.id.clone(),
        condition,
        whole_text,
        per_segment_texts,
        declared_questions,
        declared_uncertainties: layout.items("UNCERTAINTIES"),
    })
}

/// Parses one discussion turn. Questions must name a domain in the set and
/// clarifications must cite a reference in `known_refs`; items failing either
/// check are dropped with a warning.
pub fn parse_utterance(
    raw: &str,
    agent_id: &str,
    round_index: usize,
    domains: &DomainSet,
    known_refs: &BTreeSet<QuestionRef>,
) -> Result<Utterance, DiscussionError> {
    const WHAT: &str = "discussion turn";
    let layout = Layout::parse(raw);
    let text = required_body(&layout, "ANALYSIS", WHAT, raw)?;
    let mut questions = Vec::new();
    for item in layout.items("QUESTIONS") {
        match addressed(&item) {
            (Some(target), q) if !q.is_empty() => match domains.resolve(&target) {
                Some(d) => questions.push(AskedQuestion {
                    asked_of: d.clone(),
                    text: q,
                }),
                None => warn!(agent = agent_id, %target, "dropping question addressed outside the domain set"),
            },
            _ => warn!(agent = agent_id, %item, "dropping question without @domain prefix"),
        }
    }
    let mut clarifications = Vec::new();
    for item in layout.items("CLARIFICATIONS") {
        let (target, text) = addressed(&item);
        match target.and_then(|t| t.parse::<QuestionRef>().ok()) {
            Some(r) if known_refs.contains(&r) && !text.is_empty() => {
                clarifications.push(Clarification { answers: r, text })
            }
            _ => warn!(agent = agent_id, %item, "dropping clarification without a known question reference"),
        }
    }
    Ok(Utterance {
        agent_id: agent_id.into(),
        round_index,
        text,
        questions,
        clarifications,
    })
}

/// Parses a round summary. `## KEY POINTS` is required; list items keep any
/// `@ref:` prefix verbatim.
pub fn parse_summary(raw: &str, round_index: usize) -> Result<RoundSummary, DiscussionError> {
    let layout = Layout::parse(raw);
    // Header names are single words, so "KEY POINTS" arrives as KEY + arg.
    let key_points = layout
        .sections
        .iter()
        .find(|s| s.name == "KEY" || s.name == "SUMMARY")
        .map(|s| s.body.clone())
        .filter(|b| !b.is_empty())
        .ok_or_else(|| unparseable("round summary", "missing or empty `## KEY POINTS` section", raw))?;
    let open_questions = layout
        .sections
        .iter()
        .filter(|s| s.name == "OPEN")
        .flat_map(|s| crate::layout::bullet_items(&s.body))
        .collect();
    Ok(RoundSummary {
        round_index,
        key_points,
        open_questions,
        clarifications_given: layout.items("CLARIFICATIONS"),
    })
}
