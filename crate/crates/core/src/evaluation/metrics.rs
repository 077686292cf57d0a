//! Comprehension metrics: embedding cosine similarity and ROUGE overlap.

use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("cosine similarity is undefined for empty vectors")]
    Empty,
}

/// `dot(a, b) / (|a| * |b|)`.
///
/// The result is clamped to `[-1, 1]` to absorb rounding on near-parallel
/// inputs.
pub fn cosine_similarity<T: Float>(a: &[T], b: &[T]) -> Result<T, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    let (mut dot, mut na, mut nb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a.iter().zip(b) {
        dot = dot + x * y;
        na = na + x * x;
        nb = nb + y * y;
    }
    if na == T::zero() || nb == T::zero() {
        return Err(MetricError::ZeroVector);
    }
    let cos = dot / (na.sqrt() * nb.sqrt());
    Ok(cos.max(-T::one()).min(T::one()))
}

/// Lowercases, drops every character that is neither alphanumeric nor
/// whitespace, and splits on whitespace. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    let cleaned: String = text
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .flat_map(char::to_lowercase)
        .collect();
    cleaned.split_whitespace().map(str::to_owned).collect()
}

/// Length of the longest common subsequence, two-row dynamic program.
pub fn lcs_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Which ROUGE flavour backs the lexical-overlap control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RougeVariant {
    /// Sentence-level longest common subsequence.
    #[default]
    RougeL,
    /// Clipped unigram overlap.
    Rouge1,
}

/// Precision, recall and their harmonic mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeScore<T> {
    pub precision: T,
    pub recall: T,
    pub f1: T,
}

impl<T: Scalar> RougeScore<T> {
    pub fn zero() -> Self {
        Self {
            precision: T::zero(),
            recall: T::zero(),
            f1: T::zero(),
        }
    }

    /// Builds a score from a match count and the two token-list lengths.
    /// Either length being zero yields all zeros.
    pub fn from_counts(matched: usize, candidate_len: usize, reference_len: usize) -> Self {
        if candidate_len == 0 || reference_len == 0 {
            return Self::zero();
        }
        let precision = T::from_count(matched) / T::from_count(candidate_len);
        let recall = T::from_count(matched) / T::from_count(reference_len);
        let sum = precision + recall;
        let f1 = if sum == T::zero() {
            T::zero()
        } else {
            (T::one() + T::one()) * precision * recall / sum
        };
        Self { precision, recall, f1 }
    }
}

/// ROUGE-L between two pre-tokenized sequences.
pub fn rouge_l_tokens<T: Scalar, S: PartialEq>(candidate: &[S], reference: &[S]) -> RougeScore<T> {
    RougeScore::from_counts(lcs_len(candidate, reference), candidate.len(), reference.len())
}

/// ROUGE-L after [`tokenize`].
pub fn rouge_l<T: Scalar>(candidate: &str, reference: &str) -> RougeScore<T> {
    rouge_l_tokens(&tokenize(candidate), &tokenize(reference))
}

/// ROUGE-1 (clipped unigram counts) after [`tokenize`].
pub fn rouge_1<T: Scalar>(candidate: &str, reference: &str) -> RougeScore<T> {
    use std::collections::HashMap;
    let cand = tokenize(candidate);
    let refr = tokenize(reference);
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in &refr {
        *counts.entry(t.as_str()).or_default() += 1;
    }
    let mut matched = 0;
    for t in &cand {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    RougeScore::from_counts(matched, cand.len(), refr.len())
}

pub fn rouge<T: Scalar>(variant: RougeVariant, candidate: &str, reference: &str) -> RougeScore<T> {
    match variant {
        RougeVariant::RougeL => rouge_l(candidate, reference),
        RougeVariant::Rouge1 => rouge_1(candidate, reference),
    }
}

/// Semantic and lexical comprehension scores for one (response, reference) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScorePair<T> {
    pub cosine: T,
    pub rouge_f1: T,
    pub rouge_precision: T,
    pub rouge_recall: T,
}

impl<T: Copy> ScorePair<T> {
    pub fn new(cosine: T, rouge: RougeScore<T>) -> Self {
        Self {
            cosine,
            rouge_f1: rouge.f1,
            rouge_precision: rouge.precision,
            rouge_recall: rouge.recall,
        }
    }
}
