use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DiscussionTranscript, QuestionRef};
use crate::corpus::DomainLabel;
use crate::layout::addressed;

/// A point of confusion raised during reading or discussion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Gap {
    /// `G1`, `G2`, ... in order of first appearance.
    pub id: String,
    pub asked_by: String,
    pub asked_of: Option<DomainLabel>,
    /// Wording of the first occurrence, verbatim. Later duplicates may have
    /// been addressed to other domains; only the first is kept here.
    pub question: String,
    /// Every recorded question that normalizes to this gap.
    pub references: Vec<QuestionRef>,
    pub resolved: bool,
    /// Rounds where the gap was raised or clarified.
    pub evidence_rounds: BTreeSet<usize>,
}

/// Lowercase, whitespace collapsed, trailing punctuation removed.
pub fn normalize_question(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_end_matches(|c: char| c.is_ascii_punctuation() || c.is_whitespace())
        .to_owned()
}

/// Groups the transcript's questions into gaps and marks the ones a later
/// clarification addressed, either by citing one of the gap's references or,
/// in a round summary, by restating the question.
pub fn extract_gaps(transcript: &DiscussionTranscript) -> Vec<Gap> {
    let mut gaps: Vec<(String, Gap)> = Vec::new();
    for q in transcript.questions() {
        let norm = normalize_question(q.text);
        if norm.is_empty() {
            continue;
        }
        let existing = gaps.iter_mut().find(|(n, _)| *n == norm);
        let gap = match existing {
            Some((_, g)) => g,
            None => {
                gaps.push((
                    norm,
                    Gap {
                        id: String::new(),
                        asked_by: q.asked_by.to_owned(),
                        asked_of: q.asked_of.cloned(),
                        question: q.text.to_owned(),
                        references: Vec::new(),
                        resolved: false,
                        evidence_rounds: BTreeSet::new(),
                    },
                ));
                &mut gaps.last_mut().expect("just pushed").1
            }
        };
        gap.references.push(q.reference);
        gap.evidence_rounds.extend(q.reference.round());
    }

    for (round, dr) in transcript.rounds.iter().enumerate() {
        for c in dr.utterances.iter().flat_map(|u| &u.clarifications) {
            for (_, g) in gaps.iter_mut().filter(|(_, g)| g.references.contains(&c.answers)) {
                g.resolved = true;
                g.evidence_rounds.insert(round);
            }
        }
        for item in &dr.summary.clarifications_given {
            let cited = match addressed(item) {
                (Some(t), _) => t.parse::<QuestionRef>().ok(),
                _ => None,
            };
            let text = normalize_question(item);
            for (norm, g) in gaps.iter_mut() {
                let by_ref = cited.is_some_and(|r| g.references.contains(&r));
                if by_ref || text.contains(norm.as_str()) {
                    g.resolved = true;
                    g.evidence_rounds.insert(round);
                }
            }
        }
    }

    gaps.into_iter()
        .enumerate()
        .map(|(i, (_, mut g))| {
            g.id = format!("G{}", i + 1);
            g
        })
        .collect()
}
