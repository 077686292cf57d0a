//! Agent profiles and their three-part memory: semantic (world knowledge),
//! episodic (dated past events) and procedural (stage prompt templates).
//!
//! Memory is fixed per profile for the whole experiment. The discussion's own
//! record lives in the transcript's round summaries, not here.

pub mod defaults;
mod profile;
mod store;
mod template;

use std::path::PathBuf;

use thiserror::Error;

pub use profile::{load_profile, parse_profile, profile_to_toml, AgentKind, AgentProfile, ProfileDocument, AGE_BANDS};
pub use store::{embed_store, EpisodicEntry, MemoryStore, Retrieved, SemanticEntry};
pub use template::{placeholders, ProceduralMemory, ProceduralTemplate, Stage, TemplateError};

use crate::evaluation::metrics::MetricError;
use crate::llm::LlmError;

/// Retrieval depth used when none is configured.
pub const DEFAULT_RETRIEVAL_K: usize = 5;

#[derive(Debug, Error)]
pub enum MemoryError {
    #[error("invalid memory entry: {0}")]
    InvalidEntry(String),
    #[error("store mixes embedding dimensions: {expected} and {got}")]
    MixedDimensions { expected: usize, got: usize },
    #[error("query has dimension {got}, store has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{0} has no embedding; run embed_store first")]
    NotEmbedded(String),
    #[error("profile `{id}`: {message}")]
    InvalidProfile { id: String, message: String },
    #[error("malformed profile document: {0}")]
    ProfileFormat(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Provider(#[from] LlmError),
}

/// Renders retrieved semantic entries as a bullet list, or the explicit
/// empty marker.
pub fn render_semantic(entries: &[Retrieved<'_, SemanticEntry>]) -> String {
    if entries.is_empty() {
        return defaults::NO_BACKGROUND.to_owned();
    }
    entries
        .iter()
        .map(|r| format!("- {}: {}", r.entry.term, r.entry.definition))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Renders retrieved episodes as dated bullets, or the explicit empty marker.
pub fn render_episodic(entries: &[Retrieved<'_, EpisodicEntry>]) -> String {
    if entries.is_empty() {
        return defaults::NO_EPISODES.to_owned();
    }
    entries
        .iter()
        .map(|r| format!("- [{}] {}", r.entry.occurred_at, r.entry.summary))
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DomainSet;
    use crate::llm::{embedding_key, FixtureKind, FixtureRecord, FixtureStore, Provider, ProviderConfig, ProviderMode};
    use proptest::prelude::*;

    fn sem(term: &str, v: Vec<f64>) -> SemanticEntry {
        SemanticEntry {
            term: term.into(),
            definition: format!("about {term}"),
            domain_tags: Default::default(),
            embedding: Some(v),
        }
    }

    fn epi(id: &str, date: &str, v: Vec<f64>) -> EpisodicEntry {
        EpisodicEntry {
            article_id: id.into(),
            occurred_at: date.into(),
            summary: format!("event {id}"),
            domain_tags: Default::default(),
            embedding: Some(v),
        }
    }

    fn store(semantic: Vec<SemanticEntry>, episodic: Vec<EpisodicEntry>) -> MemoryStore {
        let mut s = MemoryStore {
            semantic,
            episodic,
            procedural: ProceduralMemory::defaults(),
            embedding_dim: None,
        };
        s.embedding_dim = s.dim();
        s
    }

    /// Exhaustive oracle: score everything, full sort with the documented
    /// tie-break, then cut.
    fn oracle_semantic(s: &MemoryStore, q: &[f64], k: usize) -> Vec<String> {
        let mut all: Vec<(f64, String, usize)> = s
            .semantic
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let v = e.embedding.as_ref().unwrap();
                let dot: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
                let na: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                let nb: f64 = q.iter().map(|a| a * a).sum::<f64>().sqrt();
                (dot / (na * nb), e.term.clone(), i)
            })
            .collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        all.into_iter().take(k).map(|t| t.1).collect()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    #[test]
    fn empty_store_retrieves_nothing() {
        let s = store(vec![], vec![]);
        assert!(s.retrieve_semantic(&[1.0, 0.0], 5).unwrap().is_empty());
        assert!(s.retrieve_episodic(&[1.0, 0.0], 5).unwrap().is_empty());
    }

    #[test]
    fn self_match_scores_one() {
        let s = store(vec![sem("x", vec![0.2, 0.5, -0.1])], vec![]);
        let r = s.retrieve_semantic(&[0.2, 0.5, -0.1], 5).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn top_k_matches_exhaustive_oracle() {
        let mut seed = 7;
        let entries: Vec<SemanticEntry> = (0..10)
            .map(|i| sem(&format!("t{i}"), (0..6).map(|_| lcg(&mut seed)).collect()))
            .collect();
        let s = store(entries, vec![]);
        let q: Vec<f64> = (0..6).map(|_| lcg(&mut seed)).collect();
        let got: Vec<String> = s
            .retrieve_semantic(&q, 3)
            .unwrap()
            .into_iter()
            .map(|r| r.entry.term.clone())
            .collect();
        assert_eq!(got, oracle_semantic(&s, &q, 3));
    }

    #[test]
    fn semantic_ties_break_by_term() {
        let s = store(
            vec![
                sem("zeta", vec![1.0, 0.0]),
                sem("alpha", vec![2.0, 0.0]),
                sem("alpha", vec![3.0, 0.0]),
            ],
            vec![],
        );
        let r = s.retrieve_semantic(&[1.0, 0.0], 3).unwrap();
        let defs: Vec<(&str, f64)> = r
            .iter()
            .map(|x| (x.entry.term.as_str(), x.entry.embedding.as_ref().unwrap()[0]))
            .collect();
        assert_eq!(defs, vec![("alpha", 2.0), ("alpha", 3.0), ("zeta", 1.0)]);
    }

    #[test]
    fn episodic_ties_prefer_newer() {
        let s = store(
            vec![],
            vec![
                epi("old", "2020-01-01", vec![1.0, 1.0]),
                epi("new", "2023-06-01", vec![1.0, 1.0]),
            ],
        );
        let r = s.retrieve_episodic(&[1.0, 1.0], 2).unwrap();
        assert_eq!(r[0].entry.article_id, "new");
        assert_eq!(r[1].entry.article_id, "old");
    }

    #[test]
    fn episodic_top_k_matches_oracle() {
        let mut seed = 99;
        let entries: Vec<EpisodicEntry> = (0..10)
            .map(|i| {
                epi(
                    &format!("a{i}"),
                    &format!("2021-0{}-01", 1 + i % 9),
                    (0..5).map(|_| lcg(&mut seed)).collect(),
                )
            })
            .collect();
        let s = store(vec![], entries);
        let q: Vec<f64> = (0..5).map(|_| lcg(&mut seed)).collect();
        let mut oracle: Vec<(f64, String)> = s
            .episodic
            .iter()
            .map(|e| {
                let v = e.embedding.as_ref().unwrap();
                let dot: f64 = v.iter().zip(&q).map(|(a, b)| a * b).sum();
                let n = v.iter().map(|a| a * a).sum::<f64>().sqrt() * q.iter().map(|a| a * a).sum::<f64>().sqrt();
                (dot / n, e.article_id.clone())
            })
            .collect();
        oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let got: Vec<String> = s
            .retrieve_episodic(&q, 4)
            .unwrap()
            .iter()
            .map(|r| r.entry.article_id.clone())
            .collect();
        let want: Vec<String> = oracle.into_iter().take(4).map(|t| t.1).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn retrieval_errors() {
        let s = store(vec![sem("x", vec![1.0, 0.0])], vec![]);
        assert!(matches!(
            s.retrieve_semantic(&[1.0, 0.0, 0.0], 1),
            Err(MemoryError::DimensionMismatch { expected: 2, got: 3 })
        ));
        let mut un = s.clone();
        un.semantic.push(SemanticEntry {
            embedding: None,
            ..sem("y", vec![])
        });
        assert!(matches!(
            un.retrieve_semantic(&[1.0, 0.0], 1),
            Err(MemoryError::NotEmbedded(_))
        ));
    }

    #[test]
    fn mixed_dimensions_surface() {
        let s = store(vec![sem("a", vec![1.0, 0.0]), sem("b", vec![1.0, 0.0, 0.0])], vec![]);
        assert!(matches!(s.validate(), Err(MemoryError::MixedDimensions { .. })));
    }

    fn replay_provider(dir: &std::path::Path) -> Provider {
        Provider::from_config(ProviderConfig {
            mode: ProviderMode::Replay,
            fixture_dir: Some(dir.to_path_buf()),
            ..ProviderConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn embed_store_uses_fixture_vectors_and_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let model = ProviderConfig::default().embedding_model;
        let mut s = store(
            vec![
                SemanticEntry {
                    embedding: None,
                    ..sem("a", vec![])
                },
                SemanticEntry {
                    embedding: None,
                    ..sem("b", vec![])
                },
            ],
            vec![EpisodicEntry {
                embedding: None,
                ..epi("e", "2022-02-02", vec![])
            }],
        );
        s.embedding_dim = None;
        let fixtures = FixtureStore::new(dir.path());
        let vectors = [vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]];
        let texts = [
            s.semantic[0].embedding_text(),
            s.semantic[1].embedding_text(),
            s.episodic[0].summary.clone(),
        ];
        for (t, v) in texts.iter().zip(&vectors) {
            fixtures
                .store(&FixtureRecord {
                    key: embedding_key(&model, t),
                    exchange: FixtureKind::Embedding {
                        model_name: model.clone(),
                        input: t.clone(),
                        values: v.clone(),
                    },
                })
                .unwrap();
        }
        let p = replay_provider(dir.path());
        let embedded = embed_store(&s, &p).unwrap();
        assert_eq!(embedded.semantic[0].embedding.as_ref().unwrap(), &vectors[0]);
        assert_eq!(embedded.semantic[1].embedding.as_ref().unwrap(), &vectors[1]);
        assert_eq!(embedded.episodic[0].embedding.as_ref().unwrap(), &vectors[2]);
        assert_eq!(embedded.embedding_dim, Some(3));
        assert_eq!(embed_store(&embedded, &p).unwrap(), embedded);
    }

    #[test]
    fn embed_store_failure_reports_provider_error() {
        let dir = tempfile::tempdir().unwrap();
        let s = store(
            vec![SemanticEntry {
                embedding: None,
                ..sem("a", vec![])
            }],
            vec![],
        );
        let p = replay_provider(dir.path());
        assert!(matches!(embed_store(&s, &p), Err(MemoryError::Provider(_))));
    }

    #[test]
    fn profile_document_roundtrip_and_defaults() {
        let text = r#"
id = "fin"
kind = "domain_expert"
persona = "a Finance expert"
expertise_domain = "Finance"

[templates]
discuss = "Discuss {title}"

[[semantic]]
term = "yield"
definition = "income from a bond"
domain_tags = ["Finance"]

[[episodic]]
article_id = "old-1"
occurred_at = "2022-03-01"
summary = "Rates rose"
"#;
        let p = parse_profile(text).unwrap();
        p.validate(&DomainSet::default()).unwrap();
        assert_eq!(
            p.memory.procedural.get(Stage::Discuss).unwrap().template,
            "Discuss {title}"
        );
        assert!(p.memory.procedural.get(Stage::Summarize).is_some());
        let back = parse_profile(&profile_to_toml(&p)).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn expert_needs_domain_in_set() {
        let mut p = AgentProfile::domain_expert("Sports");
        assert!(p.validate(&DomainSet::default()).is_err());
        p.expertise_domain = None;
        assert!(p.validate(&DomainSet::default()).is_err());
        let child = AgentProfile::age_group(AGE_BANDS[0]);
        child.validate(&DomainSet::default()).unwrap();
        assert_eq!(child.id, "age_6_12");
    }

    #[test]
    fn empty_memories_render_markers() {
        assert_eq!(render_semantic(&[]), defaults::NO_BACKGROUND);
        assert_eq!(render_episodic(&[]), defaults::NO_EPISODES);
    }

    proptest! {
        #[test]
        fn retrieval_is_prefix_monotone(seed in any::<u64>(), k in 0usize..9) {
            let mut seed = seed;
            let entries: Vec<SemanticEntry> = (0..8)
                .map(|i| sem(&format!("t{}", i % 3), (0..4).map(|_| (lcg(&mut seed) * 2.0).round()).chain([1.0]).collect()))
                .collect();
            let s = store(entries, vec![]);
            let q: Vec<f64> = (0..4).map(|_| lcg(&mut seed)).chain([1.0]).collect();
            let a: Vec<_> = s.retrieve_semantic(&q, k).unwrap().into_iter().map(|r| r.entry as *const _).collect();
            let b: Vec<_> = s.retrieve_semantic(&q, k + 1).unwrap().into_iter().map(|r| r.entry as *const _).collect();
            prop_assert_eq!(&a[..], &b[..a.len()]);
            let again: Vec<_> = s.retrieve_semantic(&q, k).unwrap().into_iter().map(|r| r.entry as *const _).collect();
            prop_assert_eq!(a, again);
        }
    }
}
