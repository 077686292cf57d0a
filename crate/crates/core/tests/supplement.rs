mod common;

use std::sync::Arc;

use newsgap::discussion::{extract_gaps, Discussion};
use newsgap::llm::simulated::SimulatedBackend;
use newsgap::llm::{Backend, ChatRequest, ChatResponse, LlmError};
use newsgap::supplement::{
    generate_discussion_supplement, generate_vanilla_supplement, SupplementError, SupplementKind,
};

#[test]
fn vanilla_supplement_never_sees_the_discussion() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let engine = Discussion::new(&provider, &corpus.domain_set);
    let article = &corpus.articles[0];
    let transcript = engine.run_discussion(&common::experts(), article, 3).unwrap();
    let gaps = extract_gaps(&transcript);

    let vanilla = generate_vanilla_supplement(&engine, article).unwrap();
    let discussion = generate_discussion_supplement(&engine, article, &transcript, &gaps).unwrap();
    assert_eq!(vanilla.kind, SupplementKind::Vanilla);
    assert_eq!(discussion.kind, SupplementKind::Discussion);
    assert!(vanilla.covered_gaps.is_empty());

    let log = provider.request_log();
    let prompt = |tag: String| {
        log.iter()
            .find(|l| l.request.request_tag == tag)
            .unwrap()
            .request
            .prompt_text()
    };
    let vanilla_prompt = prompt(format!("supplement:vanilla:{}", article.id));
    let discussion_prompt = prompt(format!("supplement:discussion:{}", article.id));
    for marker in ["<round", "<utterance", "clarifies ["] {
        assert!(!vanilla_prompt.contains(marker), "vanilla prompt carries `{marker}`");
    }
    for g in &gaps {
        assert!(!vanilla_prompt.contains(&g.question));
        assert!(discussion_prompt.contains(&g.id));
    }
    assert!(discussion_prompt.contains("<round number=\"3\">"));
}

#[test]
fn every_open_gap_gets_a_section() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let engine = Discussion::new(&provider, &corpus.domain_set);
    for article in &corpus.articles {
        let transcript = engine.run_discussion(&common::experts(), article, 3).unwrap();
        let gaps = extract_gaps(&transcript);
        let s = generate_discussion_supplement(&engine, article, &transcript, &gaps).unwrap();
        for g in gaps.iter().filter(|g| !g.resolved) {
            assert!(s.covered_gaps.contains(&g.id), "{} uncovered", g.id);
        }
        for section in &s.sections {
            assert!(s.full_text.contains(&section.body));
        }
    }
}

/// Simulated model whose discussion supplement ignores the gaps.
struct Forgetful(SimulatedBackend);

impl Backend for Forgetful {
    fn chat(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let mut r = self.0.chat(request)?;
        if request.request_tag.starts_with("supplement:discussion:") {
            r.content = "## SECTION Background\nGeneral context only.\n".into();
        }
        Ok(r)
    }

    fn embed(&self, model_name: &str, texts: &[String]) -> Result<Vec<Vec<f64>>, LlmError> {
        self.0.embed(model_name, texts)
    }
}

#[test]
fn uncovered_gaps_are_an_error() {
    let provider = common::live_provider(Arc::new(Forgetful(SimulatedBackend::default())));
    let corpus = common::demo_corpus(&provider);
    let engine = Discussion::new(&provider, &corpus.domain_set);
    let article = &corpus.articles[0];
    let transcript = engine.run_discussion(&common::experts(), article, 3).unwrap();
    let gaps = extract_gaps(&transcript);
    assert!(gaps.iter().any(|g| !g.resolved));
    match generate_discussion_supplement(&engine, article, &transcript, &gaps) {
        Err(SupplementError::UncoveredGaps(ids)) => assert!(!ids.is_empty()),
        other => panic!("expected uncovered gaps, got {other:?}"),
    }
}

#[test]
fn incomplete_transcript_is_rejected() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let engine = Discussion::new(&provider, &corpus.domain_set);
    let article = &corpus.articles[0];
    let mut transcript = engine.run_discussion(&common::experts(), article, 2).unwrap();
    transcript.rounds.pop();
    assert!(matches!(
        generate_discussion_supplement(&engine, article, &transcript, &[]),
        Err(SupplementError::Precondition(_))
    ));
    let mut empty = article.clone();
    empty.body.clear();
    assert!(matches!(
        generate_vanilla_supplement(&engine, &empty),
        Err(SupplementError::Precondition(_))
    ));
}
