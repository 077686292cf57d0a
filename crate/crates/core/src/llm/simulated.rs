//! Deterministic stand-in for a chat and embedding model.
//!
//! The responder reads the prompt the way the built-in templates lay it out
//! (tagged article segments, the expertise line, question lists) and answers
//! in the documented section layout. Its behaviour is a fixed function of the
//! prompt and the request tag:
//!
//! * a reader restates its own domain's segment in full and only the opening
//!   quarter of every other segment, asking about the rest;
//! * with a supplement, a foreign segment is understood as far as the
//!   supplement's vocabulary covers it;
//! * the discussion supplement explains each gap's segment to a depth that
//!   grows with the number of round summaries and saturates at three;
//! * the vanilla supplement explains every segment to a fixed shallow depth.
//!
//! Embeddings are L2-normalized hashed bags of words.

use std::collections::BTreeSet;

use sha2::{Digest, Sha256};

use super::{Backend, ChatRequest, ChatResponse, FinishReason, LlmError, Usage};
use crate::evaluation::metrics::tokenize;

/// Share of a foreign segment a reader follows unaided.
pub const FOREIGN_BASE: f64 = 0.25;
/// Depth of the vanilla supplement's per-segment explanation.
pub const VANILLA_DEPTH: f64 = 0.35;
/// Default embedding width.
pub const DEFAULT_DIM: usize = 256;

/// Depth of a discussion supplement's explanation after `rounds` summaries.
pub fn discussion_depth(rounds: usize) -> f64 {
    (0.45 + 0.2 * rounds as f64).min(1.0)
}

#[derive(Debug, Clone)]
pub struct SimulatedBackend {
    dim: usize,
}

impl Default for SimulatedBackend {
    fn default() -> Self {
        Self { dim: DEFAULT_DIM }
    }
}

impl SimulatedBackend {
    pub fn new(dim: usize) -> Self {
        Self { dim: dim.max(1) }
    }

    /// Response text for a request, by tag family.
    pub fn respond(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let prompt = request.prompt_text();
        let parts: Vec<&str> = request.request_tag.split(':').collect();
        let text = match parts[0] {
            "independent_read" => read(&prompt, None),
            "control_read" => read(&prompt, between(&prompt, "<supplement>", "</supplement>")),
            "discuss" => {
                let round = parts
                    .get(2)
                    .and_then(|r| r.strip_prefix('r'))
                    .and_then(|r| r.parse().ok())
                    .unwrap_or(0);
                discuss(&prompt, round)
            }
            "summarize" => summarize(&prompt),
            "supplement" if parts.get(1) == Some(&"discussion") => discussion_supplement(&prompt),
            "supplement" if parts.get(1) == Some(&"vanilla") => vanilla_supplement(&prompt),
            "segment_classify" => classify(&prompt),
            _ => {
                return Err(LlmError::HttpStatus {
                    status: 400,
                    body: format!("simulated model has no script for tag `{}`", request.request_tag),
                })
            }
        };
        Ok(text)
    }
}

impl Backend for SimulatedBackend {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let content = self.respond(request)?;
        let prompt_tokens = request.prompt_text().split_whitespace().count() as u32;
        let completion_tokens = content.split_whitespace().count() as u32;
        Ok(ChatResponse {
            content,
            finish_reason: FinishReason::Stop,
            usage: Usage {
                prompt_tokens,
                completion_tokens,
                total_tokens: prompt_tokens + completion_tokens,
            },
            cached: false,
        })
    }

    fn embed(&self, _model_name: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, LlmError> {
        Ok(texts.iter().map(|t| hashed_embedding(t, self.dim)).collect())
    }
}

/// Token counts hashed into `dim` buckets, L2-normalized. Text without tokens
/// maps to the first basis vector.
pub fn hashed_embedding(text: &str, dim: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    for token in tokenize(text) {
        let h = Sha256::digest(token.as_bytes());
        let bucket = u64::from_le_bytes(h[..8].try_into().expect("8 bytes")) % dim as u64;
        v[bucket as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn between<'a>(text: &'a str, open: &str, close: &str) -> Option<&'a str> {
    let start = text.find(open)? + open.len();
    let end = start + text[start..].find(close)?;
    Some(text[start..end].trim())
}

/// `(domain, text)` for every tagged segment of the article block.
fn segments(prompt: &str) -> Vec<(String, String)> {
    let Some(start) = prompt.find("<article") else {
        return Vec::new();
    };
    let article = &prompt[start..prompt[start..].find("</article>").map_or(prompt.len(), |e| start + e)];
    let mut out = Vec::new();
    let mut rest = article;
    while let Some(i) = rest.find("<segment domain=\"") {
        rest = &rest[i + "<segment domain=\"".len()..];
        let Some(q) = rest.find("\">") else { break };
        let domain = rest[..q].to_owned();
        rest = &rest[q + 2..];
        let Some(e) = rest.find("</segment>") else { break };
        out.push((domain, rest[..e].to_owned()));
        rest = &rest[e..];
    }
    out
}

fn expertise(prompt: &str) -> Option<String> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("Your area of expertise: "))
        .map(|e| e.trim_end_matches('.').trim().to_owned())
}

fn is_own(domain: &str, expertise: Option<&str>) -> bool {
    expertise.is_some_and(|e| e.eq_ignore_ascii_case(domain))
}

/// The first `ceil(fraction * n)` words of `text`.
fn prefix(text: &str, fraction: f64) -> String {
    let words: Vec<&str> = text.split_whitespace().collect();
    let n = ((fraction.clamp(0.0, 1.0) * words.len() as f64).ceil() as usize).min(words.len());
    words[..n].join(" ")
}

/// Share of the words of `text` whose token occurs in `vocabulary`.
fn coverage(text: &str, vocabulary: &BTreeSet<String>) -> f64 {
    let words: Vec<&str> = text.split_whitespace().collect();
    if words.is_empty() {
        return 0.0;
    }
    let hit = words
        .iter()
        .filter(|w| tokenize(w).iter().all(|t| vocabulary.contains(t)))
        .count();
    hit as f64 / words.len() as f64
}

/// Distinct tokens of five or more characters, longest first.
fn key_terms(text: &str) -> Vec<String> {
    let set: BTreeSet<String> = tokenize(text).into_iter().filter(|t| t.chars().count() >= 5).collect();
    let mut terms: Vec<String> = set.into_iter().collect();
    terms.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)));
    if terms.is_empty() {
        terms.extend(tokenize(text).into_iter().take(1));
    }
    terms
}

fn first_sentence(text: &str) -> String {
    let text = text.trim();
    for (i, c) in text.char_indices() {
        if matches!(c, '.' | '!' | '?') {
            let next = text[i + c.len_utf8()..].chars().next();
            if next.is_none_or(char::is_whitespace) {
                return text[..i + c.len_utf8()].to_owned();
            }
        }
    }
    text.to_owned()
}

fn sentence_with(text: &str, term: &str) -> String {
    let mut rest = text.trim();
    while !rest.is_empty() {
        let s = first_sentence(rest);
        if tokenize(&s).iter().any(|t| t == term) {
            return s;
        }
        rest = rest[s.len()..].trim_start();
    }
    first_sentence(text)
}

fn read(prompt: &str, supplement: Option<&str>) -> String {
    let segs = segments(prompt);
    let exp = expertise(prompt);
    let vocabulary: BTreeSet<String> = supplement
        .map(|s| tokenize(s).into_iter().collect())
        .unwrap_or_default();
    let mut analysis = Vec::new();
    let mut sections = String::new();
    let mut questions = String::new();
    let mut uncertainties = String::new();
    for (domain, text) in &segs {
        let base = if is_own(domain, exp.as_deref()) {
            1.0
        } else {
            FOREIGN_BASE
        };
        let fraction = base.max(coverage(text, &vocabulary));
        let understood = prefix(text, fraction);
        sections.push_str(&format!("## SEGMENT {domain}\n{understood}\n"));
        analysis.push(understood);
        if fraction < 1.0 {
            let term = key_terms(text).into_iter().next().unwrap_or_default();
            questions.push_str(&format!(
                "- @{domain}: What does \"{term}\" mean in the {domain} part?\n"
            ));
            uncertainties.push_str(&format!("- How the {domain} details fit together.\n"));
        }
    }
    if analysis.is_empty() {
        analysis.push("The article gives no tagged material to work with.".into());
    }
    format!(
        "## ANALYSIS\n{}\n{sections}## QUESTIONS\n{}## UNCERTAINTIES\n{}",
        analysis.join(" "),
        if questions.is_empty() {
            "- none\n".into()
        } else {
            questions
        },
        if uncertainties.is_empty() {
            "- none\n".into()
        } else {
            uncertainties
        },
    )
}

/// `(reference, domain, question)` from `- [REF] asker asks @Domain: text` lines.
fn listed_questions(block: &str) -> Vec<(String, String, String)> {
    block
        .lines()
        .filter_map(|l| {
            let l = l.trim().strip_prefix("- [")?;
            let (reference, rest) = l.split_once(']')?;
            let at = rest.find(" @")?;
            let (domain, text) = rest[at + 2..].split_once(':')?;
            Some((reference.to_owned(), domain.trim().to_owned(), text.trim().to_owned()))
        })
        .collect()
}

fn quoted(text: &str) -> Option<&str> {
    between(text, "\"", "\"")
}

fn discuss(prompt: &str, round: usize) -> String {
    let segs = segments(prompt);
    let exp = expertise(prompt);
    let own = segs.iter().find(|(d, _)| is_own(d, exp.as_deref()));
    let analysis = match own {
        Some((d, t)) => format!("From the {d} side: {}", first_sentence(t)),
        None => format!(
            "As a general reader I follow the main story: {}",
            segs.first().map(|(_, t)| first_sentence(t)).unwrap_or_default()
        ),
    };
    let foreign: Vec<&(String, String)> = segs.iter().filter(|(d, _)| !is_own(d, exp.as_deref())).collect();
    let mut questions = String::from("- none\n");
    if let Some((d, t)) = foreign.get(round) {
        let terms = key_terms(t);
        let term = terms.get(1).or(terms.first()).cloned().unwrap_or_default();
        let audience = exp
            .as_deref()
            .filter(|e| segs.iter().any(|(d, _)| d.eq_ignore_ascii_case(e)));
        questions = format!(
            "- @{d}: How does \"{term}\" bear on {}?\n",
            audience.map_or("everyday readers".to_owned(), |e| format!("{e} matters"))
        );
    }
    let mut clarifications = String::new();
    if let Some((d, t)) = own {
        let block = between(prompt, "<open_questions>", "</open_questions>").unwrap_or("");
        for (reference, domain, text) in listed_questions(block) {
            if domain.eq_ignore_ascii_case(d) {
                let explanation =
                    quoted(&text).map_or_else(|| first_sentence(t), |term| sentence_with(t, &term.to_lowercase()));
                clarifications.push_str(&format!("- @{reference}: {explanation}\n"));
            }
        }
    }
    if clarifications.is_empty() {
        clarifications.push_str("- none\n");
    }
    format!("## ANALYSIS\n{analysis}\n## QUESTIONS\n{questions}## CLARIFICATIONS\n{clarifications}")
}

fn summarize(prompt: &str) -> String {
    let utterances = between(prompt, "<utterances>", "</utterances>").unwrap_or("");
    let mut points = Vec::new();
    let mut rest = utterances;
    while let Some(i) = rest.find("<utterance agent=\"") {
        rest = &rest[i + "<utterance agent=\"".len()..];
        let Some(q) = rest.find("\">") else { break };
        let agent = &rest[..q];
        let first = rest[q + 2..].trim_start().lines().next().unwrap_or("").trim();
        points.push(format!("{agent}: {first}"));
    }
    let block = between(prompt, "<open_questions>", "</open_questions>").unwrap_or("");
    let mut open = String::new();
    let mut clarified = String::new();
    for line in block.lines() {
        let Some((reference, _, text)) = listed_questions(line).pop() else {
            continue;
        };
        if let Some(t) = text.strip_suffix("(clarified)") {
            clarified.push_str(&format!("- @{reference}: {}\n", t.trim()));
        } else {
            let t = text.strip_suffix("(open)").unwrap_or(&text);
            open.push_str(&format!("- @{reference}: {}\n", t.trim()));
        }
    }
    format!(
        "## KEY POINTS\n{}\n## OPEN QUESTIONS\n{}## CLARIFICATIONS\n{}",
        if points.is_empty() {
            "Nothing was said.".to_owned()
        } else {
            points.join("\n")
        },
        if open.is_empty() { "- none\n".into() } else { open },
        if clarified.is_empty() {
            "- none\n".into()
        } else {
            clarified
        },
    )
}

fn discussion_supplement(prompt: &str) -> String {
    let segs = segments(prompt);
    let rounds = between(prompt, "<summaries>", "</summaries>").map_or(0, |s| s.matches("<round number=").count());
    let depth = discussion_depth(rounds);
    let gaps = between(prompt, "<gaps>", "</gaps>").unwrap_or("");
    let mut out = String::new();
    for line in gaps.lines() {
        let Some(l) = line.trim().strip_prefix("- [") else {
            continue;
        };
        let Some((id, rest)) = l.split_once(']') else { continue };
        let domain = rest
            .find(" @")
            .and_then(|at| rest[at + 2..].split_once(':'))
            .map(|(d, _)| d.trim().to_owned())
            .unwrap_or_default();
        let seg = segs
            .iter()
            .find(|(d, _)| d.eq_ignore_ascii_case(&domain))
            .or(segs.first());
        if let Some((d, t)) = seg {
            let term = quoted(rest).unwrap_or(d.as_str());
            out.push_str(&format!("## SECTION [{id}] {d}: {term}\n{}\n", prefix(t, depth)));
        }
    }
    if out.is_empty() {
        out.push_str("## SECTION Overview\n");
        let lead: Vec<String> = segs.iter().map(|(_, t)| first_sentence(t)).collect();
        out.push_str(&if lead.is_empty() {
            "No material.".to_owned()
        } else {
            lead.join(" ")
        });
        out.push('\n');
    }
    out
}

fn vanilla_supplement(prompt: &str) -> String {
    let segs = segments(prompt);
    if segs.is_empty() {
        return "## SECTION Overview\nNo material.\n".into();
    }
    segs.iter()
        .map(|(d, t)| format!("## SECTION {d} background\n{}\n", prefix(t, VANILLA_DEPTH)))
        .collect()
}

const LEXICON: [(&str, &[&str]); 4] = [
    (
        "finance",
        &[
            "bank",
            "rate",
            "rates",
            "market",
            "markets",
            "investor",
            "investors",
            "stock",
            "stocks",
            "inflation",
            "bond",
            "bonds",
            "percent",
            "fund",
            "funds",
            "price",
            "prices",
            "credit",
            "loan",
            "loans",
        ],
    ),
    (
        "law",
        &[
            "court",
            "courts",
            "law",
            "laws",
            "ruling",
            "judge",
            "judges",
            "legal",
            "regulation",
            "regulations",
            "appeal",
            "statute",
            "lawsuit",
            "plaintiff",
            "liability",
            "rules",
        ],
    ),
    (
        "agriculture",
        &[
            "crop",
            "crops",
            "farm",
            "farms",
            "farmer",
            "farmers",
            "harvest",
            "soil",
            "grain",
            "livestock",
            "yield",
            "yields",
            "irrigation",
            "seed",
            "seeds",
            "fertilizer",
        ],
    ),
    (
        "technology",
        &[
            "chip",
            "chips",
            "software",
            "data",
            "semiconductor",
            "semiconductors",
            "ai",
            "network",
            "device",
            "devices",
            "algorithm",
            "sensor",
            "sensors",
            "satellite",
            "computing",
        ],
    ),
];

fn classify(prompt: &str) -> String {
    let domains: Vec<String> = prompt
        .lines()
        .find_map(|l| l.split_once("belong to: "))
        .map(|(_, rest)| {
            rest.trim_end_matches('?')
                .split(", ")
                .map(|d| d.trim().to_owned())
                .collect()
        })
        .unwrap_or_default();
    let paragraph = tokenize(between(prompt, "<paragraph>", "</paragraph>").unwrap_or(""));
    let mut best: Option<(usize, &String)> = None;
    for d in &domains {
        let words = LEXICON
            .iter()
            .find(|(name, _)| d.eq_ignore_ascii_case(name))
            .map_or(&[][..], |(_, w)| *w);
        let score = paragraph.iter().filter(|t| words.contains(&t.as_str())).count();
        if best.is_none_or(|(s, _)| score > s) {
            best = Some((score, d));
        }
    }
    best.map_or_else(|| "Unknown".to_owned(), |(_, d)| d.clone())
}
