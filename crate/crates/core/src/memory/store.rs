use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{MemoryError, ProceduralMemory};
use crate::corpus::{parse_iso_date, DomainLabel};
use crate::evaluation::metrics::cosine_similarity;
use crate::llm::Provider;

/// A concept, term or fact the agent already knows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticEntry {
    pub term: String,
    pub definition: String,
    #[serde(default)]
    pub domain_tags: BTreeSet<DomainLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

impl SemanticEntry {
    pub fn embedding_text(&self) -> String {
        format!("{}: {}", self.term, self.definition)
    }
}

/// A dated past news event the agent remembers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpisodicEntry {
    pub article_id: String,
    pub occurred_at: String,
    pub summary: String,
    #[serde(default)]
    pub domain_tags: BTreeSet<DomainLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Retrieved<'a, T> {
    pub entry: &'a T,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MemoryStore {
    pub semantic: Vec<SemanticEntry>,
    pub episodic: Vec<EpisodicEntry>,
    pub procedural: ProceduralMemory,
    pub embedding_dim: Option<usize>,
}

impl MemoryStore {
    /// Checks entry invariants and that every embedding has one dimension.
    pub fn validate(&self) -> Result<(), MemoryError> {
        for e in &self.semantic {
            if e.term.trim().is_empty() {
                return Err(MemoryError::InvalidEntry("semantic entry with empty term".into()));
            }
        }
        for e in &self.episodic {
            if e.summary.trim().is_empty() {
                return Err(MemoryError::InvalidEntry(format!(
                    "episodic entry for `{}` has an empty summary",
                    e.article_id
                )));
            }
            parse_iso_date(&e.occurred_at)
                .map_err(|m| MemoryError::InvalidEntry(format!("episodic entry for `{}`: {m}", e.article_id)))?;
        }
        let mut dim = self.embedding_dim;
        let all = self
            .semantic
            .iter()
            .filter_map(|e| e.embedding.as_ref())
            .chain(self.episodic.iter().filter_map(|e| e.embedding.as_ref()));
        for v in all {
            match dim {
                None => dim = Some(v.len()),
                Some(d) if d != v.len() => {
                    return Err(MemoryError::MixedDimensions {
                        expected: d,
                        got: v.len(),
                    })
                }
                _ => {}
            }
        }
        if dim == Some(0) {
            return Err(MemoryError::InvalidEntry("zero-length embedding".into()));
        }
        self.procedural.validate()?;
        Ok(())
    }

    pub fn is_fully_embedded(&self) -> bool {
        self.semantic.iter().all(|e| e.embedding.is_some()) && self.episodic.iter().all(|e| e.embedding.is_some())
    }

    /// Declared dimension, or the length of the first stored embedding.
    pub fn dim(&self) -> Option<usize> {
        self.embedding_dim.or_else(|| {
            self.semantic
                .iter()
                .filter_map(|e| e.embedding.as_ref())
                .chain(self.episodic.iter().filter_map(|e| e.embedding.as_ref()))
                .map(Vec::len)
                .next()
        })
    }

    fn check_query(&self, query: &[f64]) -> Result<(), MemoryError> {
        match self.dim() {
            Some(d) if d != query.len() => Err(MemoryError::DimensionMismatch {
                expected: d,
                got: query.len(),
            }),
            _ => Ok(()),
        }
    }

    /// Top-`k` semantic entries by cosine similarity to `query`. Ties go to
    /// the lexicographically smaller term, then to the earlier entry.
    pub fn retrieve_semantic(&self, query: &[f64], k: usize) -> Result<Vec<Retrieved<'_, SemanticEntry>>, MemoryError> {
        if self.semantic.is_empty() {
            return Ok(Vec::new());
        }
        self.check_query(query)?;
        let mut scored = Vec::with_capacity(self.semantic.len());
        for (i, e) in self.semantic.iter().enumerate() {
            let v = e
                .embedding
                .as_deref()
                .ok_or_else(|| MemoryError::NotEmbedded(format!("semantic entry `{}`", e.term)))?;
            scored.push((
                i,
                Retrieved {
                    entry: e,
                    score: cosine_similarity(v, query)?,
                },
            ));
        }
        scored.sort_by(|(ia, a), (ib, b)| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.entry.term.cmp(&b.entry.term))
                .then_with(|| ia.cmp(ib))
        });
        Ok(scored.into_iter().take(k).map(|(_, r)| r).collect())
    }

    /// Top-`k` episodic entries by cosine similarity. Ties go to the more
    /// recent event, then the smaller article id, then the earlier entry.
    pub fn retrieve_episodic(&self, query: &[f64], k: usize) -> Result<Vec<Retrieved<'_, EpisodicEntry>>, MemoryError> {
        if self.episodic.is_empty() {
            return Ok(Vec::new());
        }
        self.check_query(query)?;
        let mut scored = Vec::with_capacity(self.episodic.len());
        for (i, e) in self.episodic.iter().enumerate() {
            let v = e
                .embedding
                .as_deref()
                .ok_or_else(|| MemoryError::NotEmbedded(format!("episodic entry `{}`", e.article_id)))?;
            let date = parse_iso_date(&e.occurred_at).map_err(MemoryError::InvalidEntry)?;
            scored.push((
                i,
                date,
                Retrieved {
                    entry: e,
                    score: cosine_similarity(v, query)?,
                },
            ));
        }
        scored.sort_by(|(ia, da, a), (ib, db, b)| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| db.cmp(da))
                .then_with(|| a.entry.article_id.cmp(&b.entry.article_id))
                .then_with(|| ia.cmp(ib))
        });
        Ok(scored.into_iter().take(k).map(|(_, _, r)| r).collect())
    }
}

/// Returns a copy of `store` in which every entry carries an embedding.
/// Entries that already have one are left alone; on failure the input is
/// untouched because a new value is built.
pub fn embed_store(store: &MemoryStore, embedder: &Provider) -> Result<MemoryStore, MemoryError> {
    store.validate()?;
    let mut texts = Vec::new();
    for e in store.semantic.iter().filter(|e| e.embedding.is_none()) {
        texts.push(e.embedding_text());
    }
    for e in store.episodic.iter().filter(|e| e.embedding.is_none()) {
        texts.push(e.summary.clone());
    }
    if texts.is_empty() {
        return Ok(store.clone());
    }
    let vectors = embedder.embed(&texts)?;
    let mut out = store.clone();
    let mut it = vectors.into_iter();
    for e in out.semantic.iter_mut().filter(|e| e.embedding.is_none()) {
        e.embedding = Some(it.next().expect("one vector per text").values);
    }
    for e in out.episodic.iter_mut().filter(|e| e.embedding.is_none()) {
        e.embedding = Some(it.next().expect("one vector per text").values);
    }
    out.embedding_dim = None;
    out.embedding_dim = out.dim();
    if let Some(d) = store.embedding_dim {
        if out.embedding_dim != Some(d) {
            return Err(MemoryError::MixedDimensions {
                expected: d,
                got: out.embedding_dim.unwrap_or(0),
            });
        }
    }
    out.validate()?;
    Ok(out)
}
