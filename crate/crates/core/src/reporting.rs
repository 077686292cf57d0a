//! Result tables in the shapes used for reporting: conditions by agent,
//! per-segment (granular) scores and average improvements, rendered as CSV or
//! markdown with a fixed number of decimals.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DomainLabel, DomainSet};
use crate::discussion::Condition;
use crate::evaluation::{EvaluationResult, ImprovementRecord, TTestRow, Treatment};

pub const DEFAULT_PRECISION: usize = 4;
/// Appended to improvement cells whose t-test is significant.
pub const SIGNIFICANCE_MARKER: &str = "*";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no results to tabulate")]
    Empty,
    #[error("results lack the {0} condition")]
    MissingCondition(String),
    #[error("no value for row `{row}`, column `{column}`")]
    MissingCell { row: String, column: String },
    #[error("segment labels differ across articles; offending articles: {0:?}")]
    SegmentMismatch(Vec<String>),
    #[error("table shape: {0}")]
    Shape(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportTable {
    pub title: String,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub cells: Vec<Vec<f64>>,
    /// Per-cell suffix such as a significance marker; same shape as `cells`.
    pub markers: Vec<Vec<String>>,
    pub precision: usize,
}

impl ReportTable {
    pub fn new(
        title: impl Into<String>,
        row_labels: Vec<String>,
        column_labels: Vec<String>,
        cells: Vec<Vec<f64>>,
    ) -> Result<Self, ReportError> {
        if cells.len() != row_labels.len() {
            return Err(ReportError::Shape(format!(
                "{} rows of cells for {} row labels",
                cells.len(),
                row_labels.len()
            )));
        }
        if let Some(r) = cells.iter().position(|r| r.len() != column_labels.len()) {
            return Err(ReportError::Shape(format!(
                "row {r} has {} cells for {} columns",
                cells[r].len(),
                column_labels.len()
            )));
        }
        let markers = cells.iter().map(|r| vec![String::new(); r.len()]).collect();
        Ok(Self {
            title: title.into(),
            row_labels,
            column_labels,
            cells,
            markers,
            precision: DEFAULT_PRECISION,
        })
    }

    pub fn with_precision(mut self, precision: usize) -> Self {
        self.precision = precision;
        self
    }

    fn index(&self, row: &str, column: &str) -> Option<(usize, usize)> {
        Some((
            self.row_labels.iter().position(|r| r == row)?,
            self.column_labels.iter().position(|c| c == column)?,
        ))
    }

    pub fn value(&self, row: &str, column: &str) -> Option<f64> {
        self.index(row, column).map(|(r, c)| self.cells[r][c])
    }

    /// The cell as rendered: rounded value plus marker.
    pub fn rendered(&self, row: &str, column: &str) -> Option<String> {
        self.index(row, column).map(|(r, c)| self.render_cell(r, c))
    }

    fn render_cell(&self, r: usize, c: usize) -> String {
        format!(
            "{}{}",
            format_value(self.cells[r][c], self.precision),
            self.markers[r][c]
        )
    }
}

/// Fixed-point rendering. Rounds the exact binary value to nearest with ties
/// to even, and never prints a negative zero.
pub fn format_value(x: f64, precision: usize) -> String {
    let s = format!("{x:.precision$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.chars().all(|c| c == '0' || c == '.') => rest.to_owned(),
        _ => s,
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Agent ids in order of first appearance.
fn agent_order<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for id in ids {
        if !out.iter().any(|o| o == id) {
            out.push(id.to_owned());
        }
    }
    out
}

fn missing(row: &str, column: &str) -> ReportError {
    ReportError::MissingCell {
        row: row.into(),
        column: column.into(),
    }
}

/// Rows are the three conditions; each agent gets a cosine and a ROUGE-F1
/// column. Cells are means across articles.
pub fn table_conditions_by_agent(results: &[EvaluationResult]) -> Result<ReportTable, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    for c in Condition::ALL {
        if !results.iter().any(|r| r.condition == c) {
            return Err(ReportError::MissingCondition(c.to_string()));
        }
    }
    let agents = agent_order(results.iter().map(|r| r.agent_id.as_str()));
    let columns: Vec<String> = agents
        .iter()
        .flat_map(|a| [format!("{a} cosine"), format!("{a} rouge")])
        .collect();
    let mut cells = Vec::new();
    for c in Condition::ALL {
        let mut row = Vec::new();
        for a in &agents {
            let picked: Vec<&EvaluationResult> = results
                .iter()
                .filter(|r| r.condition == c && &r.agent_id == a)
                .collect();
            let cos: Vec<f64> = picked.iter().map(|r| r.whole_article.cosine).collect();
            let rouge: Vec<f64> = picked.iter().map(|r| r.whole_article.rouge_f1).collect();
            row.push(mean(&cos).ok_or_else(|| missing(c.as_str(), &format!("{a} cosine")))?);
            row.push(mean(&rouge).ok_or_else(|| missing(c.as_str(), &format!("{a} rouge")))?);
        }
        cells.push(row);
    }
    ReportTable::new(
        "Comprehension scores by condition and agent",
        Condition::ALL.iter().map(|c| c.to_string()).collect(),
        columns,
        cells,
    )
}

/// Row label used by [`table_granular`].
pub fn granular_row(segment: &DomainLabel, condition: Condition) -> String {
    format!("{segment} part / {condition}")
}

/// One block of condition rows per segment label, one column per agent;
/// cells are mean per-segment cosine. Every article must carry the same
/// segment labels. `order` fixes the block order (labels it does not list
/// follow alphabetically).
pub fn table_granular(results: &[EvaluationResult], order: Option<&DomainSet>) -> Result<ReportTable, ReportError> {
    let first = results.first().ok_or(ReportError::Empty)?;
    let mut per_article: BTreeMap<&str, Vec<&DomainLabel>> = BTreeMap::new();
    for r in results {
        per_article
            .entry(r.article_id.as_str())
            .or_insert_with(|| r.per_segment.keys().collect());
    }
    let reference: Vec<&DomainLabel> = first.per_segment.keys().collect();
    let offending: Vec<String> = per_article
        .iter()
        .filter(|(_, labels)| **labels != reference)
        .map(|(id, _)| id.to_string())
        .collect();
    if !offending.is_empty() {
        let mut ids = vec![first.article_id.clone()];
        ids.extend(offending);
        return Err(ReportError::SegmentMismatch(ids));
    }
    let mut labels: Vec<DomainLabel> = reference.into_iter().cloned().collect();
    if let Some(set) = order {
        labels.sort_by_key(|l| set.position(l).unwrap_or(usize::MAX));
    }
    let agents = agent_order(results.iter().map(|r| r.agent_id.as_str()));
    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for label in &labels {
        for c in Condition::ALL {
            let row_label = granular_row(label, c);
            let mut row = Vec::new();
            for a in &agents {
                let xs: Vec<f64> = results
                    .iter()
                    .filter(|r| r.condition == c && &r.agent_id == a)
                    .filter_map(|r| r.per_segment.get(label).map(|s| s.scores.cosine))
                    .collect();
                row.push(mean(&xs).ok_or_else(|| missing(&row_label, a))?);
            }
            rows.push(row_label);
            cells.push(row);
        }
    }
    ReportTable::new("Per-segment comprehension (cosine)", rows, agents, cells)
}

/// Rows `vanilla` and `discussion`, one column per agent; cells are mean
/// cosine improvements over the original condition, marked when the paired
/// t-test is significant.
pub fn table_improvements(improvements: &[ImprovementRecord], ttests: &[TTestRow]) -> Result<ReportTable, ReportError> {
    if improvements.is_empty() {
        return Err(ReportError::Empty);
    }
    let agents = agent_order(improvements.iter().map(|i| i.agent_id.as_str()));
    let mut cells = Vec::new();
    let mut markers = Vec::new();
    for t in Treatment::ALL {
        let mut row = Vec::new();
        let mut marks = Vec::new();
        for a in &agents {
            let xs: Vec<f64> = improvements
                .iter()
                .filter(|i| i.condition == t && &i.agent_id == a)
                .map(|i| i.delta_cosine)
                .collect();
            row.push(mean(&xs).ok_or_else(|| missing(t.as_str(), a))?);
            let significant = ttests
                .iter()
                .find(|r| r.condition == t && &r.agent_id == a)
                .and_then(|r| r.result.as_ref())
                .is_some_and(|r| r.significant);
            marks.push(if significant {
                SIGNIFICANCE_MARKER.to_owned()
            } else {
                String::new()
            });
        }
        cells.push(row);
        markers.push(marks);
    }
    let mut table = ReportTable::new(
        "Average improvement in cosine over the original condition",
        Treatment::ALL.iter().map(|t| t.as_str().to_owned()).collect(),
        agents,
        cells,
    )?;
    table.markers = markers;
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Markdown => "md",
        }
    }
}

fn escape_md(s: &str) -> String {
    s.replace('|', "\\|")
}

/// Renders with LF line endings; identical tables give identical bytes.
pub fn render(table: &ReportTable, format: Format) -> String {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            let header = std::iter::once("row").chain(table.column_labels.iter().map(String::as_str));
            w.write_record(header).expect("in-memory write");
            for (r, label) in table.row_labels.iter().enumerate() {
                let mut record = vec![label.clone()];
                record.extend((0..table.column_labels.len()).map(|c| table.render_cell(r, c)));
                w.write_record(&record).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
        }
        Format::Markdown => {
            let mut out = format!("**{}**\n\n|", escape_md(&table.title));
            for c in &table.column_labels {
                write!(out, " | {}", escape_md(c)).expect("string write");
            }
            out.push_str(" |\n|---");
            for _ in &table.column_labels {
                out.push_str("|---:");
            }
            out.push_str("|\n");
            for (r, label) in table.row_labels.iter().enumerate() {
                write!(out, "| {}", escape_md(label)).expect("string write");
                for c in 0..table.column_labels.len() {
                    write!(out, " | {}", table.render_cell(r, c)).expect("string write");
                }
                out.push_str(" |\n");
            }
            out
        }
    }
}

pub fn emit(table: &ReportTable, format: Format, path: &Path) -> Result<(), ReportError> {
    std::fs::write(path, render(table, format)).map_err(|e| ReportError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}
