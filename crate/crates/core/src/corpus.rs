//! News articles with domain-labelled segments, and their line-delimited file
//! format.
//!
//! One JSON object per line with the fields `id`, `title`, `body`,
//! `segments` (a list of `{domain, start, end}`), `source` and
//! `published_at` (nullable), in that order. Offsets are byte offsets into
//! the UTF-8 body, half-open.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

use crate::llm::{LlmError, Message, Provider};
use crate::memory::{ProceduralMemory, Stage, TemplateError};

/// The four domains used when no explicit domain set is configured.
pub const DEFAULT_DOMAINS: [&str; 4] = ["Finance", "Law", "Agriculture", "Technology"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DomainLabel(String);

impl DomainLabel {
    pub fn new(label: impl Into<String>) -> Self {
        Self(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for DomainLabel {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

/// Ordered, duplicate-free, non-empty list of domain labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<DomainLabel>", into = "Vec<DomainLabel>")]
pub struct DomainSet(Vec<DomainLabel>);

impl DomainSet {
    pub fn new(labels: Vec<DomainLabel>) -> Result<Self, CorpusError> {
        if labels.is_empty() {
            return Err(CorpusError::DomainSet("domain set is empty".into()));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.as_str().trim().is_empty() {
                return Err(CorpusError::DomainSet("blank domain label".into()));
            }
            if !seen.insert(l.as_str().to_lowercase()) {
                return Err(CorpusError::DomainSet(format!("duplicate domain label `{l}`")));
            }
        }
        Ok(Self(labels))
    }

    pub fn labels(&self) -> &[DomainLabel] {
        &self.0
    }

    pub fn contains(&self, label: &DomainLabel) -> bool {
        self.0.contains(label)
    }

    pub fn position(&self, label: &DomainLabel) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }

    /// Case-insensitive lookup of free text against the set. Accepts a label
    /// followed by extra words ("Law expert").
    pub fn resolve(&self, text: &str) -> Option<&DomainLabel> {
        let t = text
            .trim()
            .trim_matches(|c: char| c == '*' || c == '"' || c == '\'' || c == '`' || c == '.')
            .trim();
        self.0.iter().find(|l| l.as_str().eq_ignore_ascii_case(t)).or_else(|| {
            let first = t.split_whitespace().next()?;
            self.0.iter().find(|l| l.as_str().eq_ignore_ascii_case(first))
        })
    }

    pub fn join(&self, sep: &str) -> String {
        self.0.iter().map(DomainLabel::as_str).collect::<Vec<_>>().join(sep)
    }
}

impl Default for DomainSet {
    fn default() -> Self {
        Self(DEFAULT_DOMAINS.iter().map(|d| DomainLabel::from(*d)).collect())
    }
}

impl TryFrom<Vec<DomainLabel>> for DomainSet {
    type Error = CorpusError;

    fn try_from(v: Vec<DomainLabel>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<DomainSet> for Vec<DomainLabel> {
    fn from(s: DomainSet) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub domain_label: DomainLabel,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewsArticle {
    pub id: String,
    pub title: String,
    pub body: String,
    pub segments: Vec<Segment>,
    pub source: String,
    pub published_at: Option<String>,
}

impl NewsArticle {
    /// Builds a segment over `body[start..end]`.
    pub fn segment(&self, domain: DomainLabel, start: usize, end: usize) -> Result<Segment, CorpusError> {
        let text = self
            .body
            .get(start..end)
            .filter(|_| start < end)
            .ok_or_else(|| CorpusError::Validation {
                article_id: self.id.clone(),
                message: format!(
                    "segment [{start}, {end}) is empty, inverted, out of bounds or not on a character boundary (body is {} bytes)",
                    self.body.len()
                ),
            })?;
        Ok(Segment {
            domain_label: domain,
            char_start: start,
            char_end: end,
            text: text.to_owned(),
        })
    }

    pub fn validate(&self, domains: &DomainSet) -> Result<(), CorpusError> {
        let fail = |message: String| CorpusError::Validation {
            article_id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(fail("article id is blank".into()));
        }
        if self.body.trim().is_empty() {
            return Err(fail("body is empty".into()));
        }
        if let Some(date) = &self.published_at {
            parse_iso_date(date).map_err(|e| fail(format!("published_at: {e}")))?;
        }
        let mut prev_end = 0;
        for (i, s) in self.segments.iter().enumerate() {
            if s.char_start >= s.char_end {
                return Err(fail(format!(
                    "segment {i} has inverted or empty range [{}, {})",
                    s.char_start, s.char_end
                )));
            }
            if s.char_end > self.body.len() {
                return Err(fail(format!(
                    "segment {i} range [{}, {}) exceeds body length {}",
                    s.char_start,
                    s.char_end,
                    self.body.len()
                )));
            }
            if i > 0 && s.char_start < prev_end {
                return Err(fail(format!(
                    "segment {i} [{}, {}) overlaps or precedes the previous segment ending at {prev_end}",
                    s.char_start, s.char_end
                )));
            }
            match self.body.get(s.char_start..s.char_end) {
                Some(t) if t == s.text => {}
                Some(_) => return Err(fail(format!("segment {i} text does not match the body span"))),
                None => return Err(fail(format!("segment {i} range is not on character boundaries"))),
            }
            if !domains.contains(&s.domain_label) {
                return Err(fail(format!(
                    "segment {i} has unknown domain label `{}` (domain set: {})",
                    s.domain_label,
                    domains.join(", ")
                )));
            }
            prev_end = s.char_end;
        }
        Ok(())
    }

    /// Distinct segment labels in first-appearance order.
    pub fn segment_labels(&self) -> Vec<DomainLabel> {
        let mut out: Vec<DomainLabel> = Vec::new();
        for s in &self.segments {
            if !out.contains(&s.domain_label) {
                out.push(s.domain_label.clone());
            }
        }
        out
    }

    /// Text of all segments carrying `label`, joined by blank lines.
    pub fn segment_text(&self, label: &DomainLabel) -> Option<String> {
        let parts: Vec<&str> = self
            .segments
            .iter()
            .filter(|s| &s.domain_label == label)
            .map(|s| s.text.as_str())
            .collect();
        (!parts.is_empty()).then(|| parts.join("\n\n"))
    }

    /// The body with each segment wrapped in `<segment domain="...">` tags.
    /// Text outside segments is kept as is.
    pub fn tagged_body(&self) -> String {
        let mut out = String::new();
        let mut pos = 0;
        for s in &self.segments {
            out.push_str(&self.body[pos..s.char_start]);
            out.push_str(&format!("<segment domain=\"{}\">{}</segment>", s.domain_label, s.text));
            pos = s.char_end;
        }
        out.push_str(&self.body[pos..]);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub articles: Vec<NewsArticle>,
    pub domain_set: DomainSet,
}

impl Corpus {
    pub fn new(articles: Vec<NewsArticle>, domain_set: DomainSet) -> Result<Self, CorpusError> {
        let c = Self { articles, domain_set };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut ids = HashSet::new();
        for a in &self.articles {
            if !ids.insert(a.id.as_str()) {
                return Err(CorpusError::Validation {
                    article_id: a.id.clone(),
                    message: "duplicate article id".into(),
                });
            }
            a.validate(&self.domain_set)?;
        }
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&NewsArticle> {
        self.articles.iter().find(|a| a.id == id)
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("article `{article_id}`: {message}")]
    Validation { article_id: String, message: String },
    #[error("invalid domain set: {0}")]
    DomainSet(String),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SegmentRecord {
    domain: DomainLabel,
    start: usize,
    end: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArticleRecord {
    id: String,
    title: String,
    body: String,
    segments: Vec<SegmentRecord>,
    source: String,
    published_at: Option<String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads a corpus under the default domain set.
pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with_domains(path, DomainSet::default())
}

/// Loads and validates a corpus file. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn load_corpus_with_domains(path: &Path, domain_set: DomainSet) -> Result<Corpus, CorpusError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut articles = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ArticleRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        let mut article = NewsArticle {
            id: record.id,
            title: record.title,
            body: record.body,
            segments: Vec::with_capacity(record.segments.len()),
            source: record.source,
            published_at: record.published_at,
        };
        for s in record.segments {
            let seg = article.segment(s.domain, s.start, s.end)?;
            article.segments.push(seg);
        }
        articles.push(article);
    }
    Corpus::new(articles, domain_set)
}

/// Writes one canonical record per line. The corpus is validated before the
/// file is touched.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<(), CorpusError> {
    corpus.validate()?;
    let mut out = String::new();
    for a in &corpus.articles {
        out.push_str(&article_line(a));
        out.push('\n');
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(out.as_bytes()).map_err(io_err(path))
}

/// Canonical single-line serialization of one article.
pub fn article_line(a: &NewsArticle) -> String {
    let record = ArticleRecord {
        id: a.id.clone(),
        title: a.title.clone(),
        body: a.body.clone(),
        segments: a
            .segments
            .iter()
            .map(|s| SegmentRecord {
                domain: s.domain_label.clone(),
                start: s.char_start,
                end: s.char_end,
            })
            .collect(),
        source: a.source.clone(),
        published_at: a.published_at.clone(),
    };
    serde_json::to_string(&record).expect("article serializes")
}

/// Accepts `YYYY-MM-DD` or an RFC 3339 timestamp.
pub fn parse_iso_date(s: &str) -> Result<chrono::NaiveDate, String> {
    if let Ok(d) = chrono::NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Ok(d);
    }
    chrono::DateTime::parse_from_rfc3339(s)
        .map(|dt| dt.date_naive())
        .map_err(|e| format!("`{s}` is not an ISO-8601 date: {e}"))
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("article `{0}` has an empty body")]
    EmptyBody(String),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(
        "article `{article_id}` paragraph {paragraph}: classifier returned `{label}`, which is not in the domain set"
    )]
    UnknownLabel {
        article_id: String,
        paragraph: usize,
        label: String,
    },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Byte ranges of blank-line separated paragraphs, trimmed of surrounding
/// whitespace.
pub fn paragraphs(body: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let mut end = 0;
    let mut offset = 0;
    for line in body.split_inclusive('\n') {
        let line_start = offset;
        offset += line.len();
        let content = line.trim_end_matches(['\n', '\r']);
        if content.trim().is_empty() {
            if let Some(s) = start.take() {
                out.push((s, end));
            }
            continue;
        }
        let lead = content.len() - content.trim_start().len();
        if start.is_none() {
            start = Some(line_start + lead);
        }
        end = line_start + content.trim_end().len();
    }
    if let Some(s) = start {
        out.push((s, end));
    }
    out
}

/// Labels each paragraph with one classification call and merges adjacent
/// paragraphs that share a label. Articles that already carry segments are
/// returned unchanged.
pub fn segment_article(
    article: &NewsArticle,
    domains: &DomainSet,
    classifier: &Provider,
    procedures: &ProceduralMemory,
) -> Result<NewsArticle, SegmentError> {
    if !article.segments.is_empty() {
        return Ok(article.clone());
    }
    if article.body.trim().is_empty() {
        return Err(SegmentError::EmptyBody(article.id.clone()));
    }
    let mut labelled: Vec<(DomainLabel, usize, usize)> = Vec::new();
    for (i, (start, end)) in paragraphs(&article.body).into_iter().enumerate() {
        let paragraph = &article.body[start..end];
        let prompt = procedures.render(
            Stage::SegmentClassify,
            &[
                ("domains", domains.join(", ")),
                ("title", article.title.clone()),
                ("paragraph", paragraph.to_owned()),
            ],
        )?;
        let request = classifier.config().chat_request(
            vec![Message::user(prompt)],
            format!("segment_classify:{}:{i}", article.id),
        );
        let response = classifier.complete(&request)?;
        let label = domains
            .resolve(response.content.lines().next().unwrap_or(""))
            .cloned()
            .ok_or_else(|| SegmentError::UnknownLabel {
                article_id: article.id.clone(),
                paragraph: i,
                label: response.content.trim().to_owned(),
            })?;
        debug!(article = %article.id, paragraph = i, %label, "classified paragraph");
        match labelled.last_mut() {
            Some((l, _, e)) if *l == label => *e = end,
            _ => labelled.push((label, start, end)),
        }
    }
    let mut out = article.clone();
    out.segments = labelled
        .into_iter()
        .map(|(l, s, e)| article.segment(l, s, e))
        .collect::<Result<_, _>>()?;
    out.validate(domains)?;
    Ok(out)
}
