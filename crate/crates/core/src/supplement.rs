//! Supplementary material shown to control-group readers: one version built
//! from a discussion's summaries and gaps, one from the article alone.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{debug, warn};

use crate::corpus::NewsArticle;
use crate::discussion::{render_summaries, Discussion, DiscussionTranscript, Gap};
use crate::layout::Layout;
use crate::llm::{LlmError, Message};
use crate::memory::{Stage, TemplateError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupplementKind {
    Vanilla,
    Discussion,
}

impl fmt::Display for SupplementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SupplementKind::Vanilla => "vanilla",
            SupplementKind::Discussion => "discussion",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplementSection {
    pub heading: String,
    pub gap_addressed: Option<String>,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupplementaryMaterial {
    pub article_id: String,
    pub kind: SupplementKind,
    pub sections: Vec<SupplementSection>,
    /// Gap ids with a dedicated section.
    pub covered_gaps: BTreeSet<String>,
    /// Reader-facing text: `### heading` blocks separated by blank lines.
    pub full_text: String,
}

impl SupplementaryMaterial {
    fn assemble(article_id: &str, kind: SupplementKind, sections: Vec<SupplementSection>) -> Self {
        let full_text = sections
            .iter()
            .map(|s| format!("### {}\n{}", s.heading, s.body))
            .collect::<Vec<_>>()
            .join("\n\n");
        Self {
            article_id: article_id.to_owned(),
            kind,
            covered_gaps: sections.iter().filter_map(|s| s.gap_addressed.clone()).collect(),
            sections,
            full_text,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("supplement serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Error)]
pub enum SupplementError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("unparseable supplement: {reason}")]
    Unparseable { reason: String, raw: String },
    #[error("supplement cites unknown gap ids: {0:?}")]
    UnknownGap(Vec<String>),
    #[error("supplement leaves unresolved gaps uncovered: {0:?}")]
    UncoveredGaps(Vec<String>),
}

fn parse_sections(raw: &str, allow_gap_tags: bool) -> Result<Vec<SupplementSection>, SupplementError> {
    let layout = Layout::parse(raw);
    let mut out = Vec::new();
    for s in layout.all("SECTION") {
        let (gap_addressed, heading) = match s.arg.strip_prefix('[').and_then(|r| r.split_once(']')) {
            Some((id, rest)) if allow_gap_tags => (Some(id.trim().to_uppercase()), rest.trim().to_owned()),
            _ => (None, s.arg.clone()),
        };
        if s.body.is_empty() {
            continue;
        }
        let heading = if heading.is_empty() {
            gap_addressed.clone().unwrap_or_else(|| "Background".into())
        } else {
            heading
        };
        out.push(SupplementSection {
            heading,
            gap_addressed,
            body: s.body.clone(),
        });
    }
    if out.is_empty() {
        return Err(SupplementError::Unparseable {
            reason: "no non-empty `## SECTION` blocks".into(),
            raw: raw.into(),
        });
    }
    Ok(out)
}

fn render_gaps(gaps: &[Gap]) -> String {
    if gaps.is_empty() {
        return crate::memory::defaults::NOTHING_YET.into();
    }
    gaps.iter()
        .map(|g| {
            format!(
                "- [{}] ({}) {} asked @{}: {}",
                g.id,
                if g.resolved { "resolved" } else { "unresolved" },
                g.asked_by,
                g.asked_of.as_ref().map(|d| d.as_str()).unwrap_or("anyone"),
                g.question
            )
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn ask(discussion: &Discussion<'_>, prompt: String, tag: String) -> Result<String, SupplementError> {
    let provider = discussion.provider();
    let request = provider.config().chat_request(vec![Message::user(prompt)], tag);
    Ok(provider.complete(&request)?.content)
}

/// Supplement grounded in a finished discussion. Every unresolved gap must
/// get a section tagged with its id; anything else is an error.
pub fn generate_discussion_supplement(
    discussion: &Discussion<'_>,
    article: &NewsArticle,
    transcript: &DiscussionTranscript,
    gaps: &[Gap],
) -> Result<SupplementaryMaterial, SupplementError> {
    if transcript.article_id != article.id {
        return Err(SupplementError::Precondition(format!(
            "transcript is for `{}`, article is `{}`",
            transcript.article_id, article.id
        )));
    }
    if transcript.rounds.is_empty() || !transcript.is_complete() {
        return Err(SupplementError::Precondition(format!(
            "transcript has {} of {} rounds",
            transcript.rounds.len(),
            transcript.n_rounds_config
        )));
    }
    let prompt = discussion.neutral_templates().render(
        Stage::Supplement,
        &[
            ("title", article.title.clone()),
            ("article", article.tagged_body()),
            ("summaries", render_summaries(transcript.summaries())),
            ("gaps", render_gaps(gaps)),
        ],
    )?;
    let raw = ask(discussion, prompt, format!("supplement:discussion:{}", article.id))?;
    let sections = parse_sections(&raw, true)?;

    let known: BTreeSet<&str> = gaps.iter().map(|g| g.id.as_str()).collect();
    let covered: BTreeSet<String> = sections.iter().filter_map(|s| s.gap_addressed.clone()).collect();
    let unknown: Vec<String> = covered
        .iter()
        .filter(|id| !known.contains(id.as_str()))
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(SupplementError::UnknownGap(unknown));
    }
    let uncovered: Vec<String> = gaps
        .iter()
        .filter(|g| !g.resolved && !covered.contains(&g.id))
        .map(|g| g.id.clone())
        .collect();
    if !uncovered.is_empty() {
        return Err(SupplementError::UncoveredGaps(uncovered));
    }
    if gaps.is_empty() {
        debug!(article = %article.id, "no gaps on record; supplement has general sections only");
    } else if covered.is_empty() {
        warn!(article = %article.id, "all gaps resolved and none cited by the supplement");
    }
    Ok(SupplementaryMaterial::assemble(
        &article.id,
        SupplementKind::Discussion,
        sections,
    ))
}

/// Supplement produced from the article alone.
pub fn generate_vanilla_supplement(
    discussion: &Discussion<'_>,
    article: &NewsArticle,
) -> Result<SupplementaryMaterial, SupplementError> {
    if article.body.trim().is_empty() {
        return Err(SupplementError::Precondition(format!(
            "article `{}` has an empty body",
            article.id
        )));
    }
    let prompt = discussion.neutral_templates().render(
        Stage::VanillaSupplement,
        &[("title", article.title.clone()), ("article", article.tagged_body())],
    )?;
    let raw = ask(discussion, prompt, format!("supplement:vanilla:{}", article.id))?;
    Ok(SupplementaryMaterial::assemble(
        &article.id,
        SupplementKind::Vanilla,
        parse_sections(&raw, false)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_with_and_without_gap_tags() {
        let raw = "## SECTION [g1] Basis points\nA basis point is...\n## SECTION Context\nMore.\n## SECTION Empty\n";
        let s = parse_sections(raw, true).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].gap_addressed.as_deref(), Some("G1"));
        assert_eq!(s[0].heading, "Basis points");
        assert_eq!(s[1].gap_addressed, None);
        let v = parse_sections(raw, false).unwrap();
        assert_eq!(v[0].gap_addressed, None);
        assert_eq!(v[0].heading, "[g1] Basis points");
        assert!(parse_sections("prose only", true).is_err());
    }
}
