mod common;

use std::collections::BTreeSet;

use newsgap::discussion::{extract_gaps, normalize_question, Discussion, DiscussionError, QuestionRef};
use newsgap::llm::simulated::SimulatedBackend;
use newsgap::llm::{FixtureStore, Provider, ProviderConfig, ProviderMode};

#[test]
fn transcript_has_one_utterance_per_agent_per_round() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let agents = common::experts();
    let engine = Discussion::new(&provider, &corpus.domain_set);
    for article in &corpus.articles {
        let t = engine.run_discussion(&agents, article, 3).unwrap();
        assert!(t.is_complete());
        assert_eq!(t.initial_responses.len(), 4);
        assert_eq!(t.rounds.len(), 3);
        for (i, round) in t.rounds.iter().enumerate() {
            let speakers: Vec<&str> = round.utterances.iter().map(|u| u.agent_id.as_str()).collect();
            assert_eq!(speakers, ["finance", "law", "agriculture", "technology"]);
            assert!(round.utterances.iter().all(|u| u.round_index == i));
            assert_eq!(round.summary.round_index, i);
        }
        assert_eq!(t.summaries().count(), 3);
    }
}

#[test]
fn questions_and_answers_are_linked() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let engine = Discussion::new(&provider, &corpus.domain_set);
    let article = &corpus.articles[0];
    let t = engine.run_discussion(&common::experts(), article, 3).unwrap();

    let questions = t.questions();
    let refs: BTreeSet<QuestionRef> = questions.iter().map(|q| q.reference).collect();
    assert_eq!(refs.len(), questions.len(), "question references are unique");
    assert!(!questions.is_empty());
    for q in &questions {
        assert_ne!(
            q.asked_of,
            corpus.domain_set.resolve(q.asked_by),
            "experts ask outside their domain"
        );
        assert_eq!(q.reference.to_string().parse::<QuestionRef>().unwrap(), q.reference);
    }
    let mut answered = 0;
    for round in &t.rounds {
        for u in &round.utterances {
            for c in &u.clarifications {
                answered += 1;
                assert!(
                    refs.contains(&c.answers),
                    "{} answers unknown {}",
                    u.agent_id,
                    c.answers
                );
                assert!(c.answers.round().is_none_or(|r| r <= u.round_index));
            }
        }
    }
    assert!(answered > 0, "experts answer questions about their domain");

    let gaps = extract_gaps(&t);
    assert!(!gaps.is_empty());
    let texts: BTreeSet<String> = gaps.iter().map(|g| normalize_question(&g.question)).collect();
    assert_eq!(texts.len(), gaps.len(), "gaps are deduplicated by text");
    for g in &gaps {
        assert!(g.references.iter().all(|r| refs.contains(r)));
        if g.resolved {
            assert!(!g.evidence_rounds.is_empty(), "{} resolved without evidence", g.id);
        }
    }
}

#[test]
fn later_rounds_see_earlier_summaries() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let engine = Discussion::new(&provider, &corpus.domain_set);
    let article = &corpus.articles[1];
    engine.run_discussion(&common::experts(), article, 2).unwrap();
    let log = provider.request_log();
    let prompt = |tag: &str| {
        log.iter()
            .find(|l| l.request.request_tag == tag)
            .map(|l| l.request.prompt_text())
            .unwrap_or_else(|| panic!("no request {tag}"))
    };
    let first = prompt(&format!("discuss:{}:r0:law", article.id));
    let second = prompt(&format!("discuss:{}:r1:law", article.id));
    assert!(!first.contains("<round number=\"1\">"));
    assert!(second.contains("<round number=\"1\">"));
    // Round 0 speakers after the first see what was already said.
    assert!(first.contains("<utterance agent=\"finance\">"));
}

#[test]
fn degenerate_setups_are_rejected() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let engine = Discussion::new(&provider, &corpus.domain_set);
    let article = &corpus.articles[0];
    let agents = common::experts();
    assert!(matches!(
        engine.run_discussion(&agents, article, 0),
        Err(DiscussionError::Precondition(_))
    ));
    assert!(matches!(
        engine.run_discussion(&agents[..1], article, 3),
        Err(DiscussionError::Precondition(_))
    ));
    let mut unsegmented = article.clone();
    unsegmented.segments.clear();
    assert!(matches!(
        engine.run_discussion(&agents, &unsegmented, 3),
        Err(DiscussionError::Precondition(_))
    ));
}

#[test]
fn failure_mid_discussion_keeps_the_completed_part() {
    let dir = tempfile::tempdir().unwrap();
    let recorder = Provider::with_backend(
        ProviderConfig {
            mode: ProviderMode::Record,
            fixture_dir: Some(dir.path().to_path_buf()),
            ..ProviderConfig::default()
        },
        std::sync::Arc::new(SimulatedBackend::default()),
    )
    .unwrap();
    let corpus = common::demo_corpus(&recorder);
    let article = &corpus.articles[0];
    let agents = common::experts();
    Discussion::new(&recorder, &corpus.domain_set)
        .run_discussion(&agents, article, 3)
        .unwrap();

    let store = FixtureStore::new(dir.path());
    let victim = recorder
        .request_log()
        .into_iter()
        .find(|l| l.request.request_tag == format!("discuss:{}:r1:agriculture", article.id))
        .unwrap();
    std::fs::remove_file(store.path_for(&victim.key)).unwrap();

    let replay = Provider::from_config(ProviderConfig {
        mode: ProviderMode::Replay,
        fixture_dir: Some(dir.path().to_path_buf()),
        ..ProviderConfig::default()
    })
    .unwrap();
    match Discussion::new(&replay, &corpus.domain_set).run_discussion(&agents, article, 3) {
        Err(DiscussionError::Interrupted { partial, source }) => {
            assert_eq!(partial.initial_responses.len(), 4);
            assert_eq!(partial.rounds.len(), 1);
            assert!(!partial.is_complete());
            assert!(source.to_string().contains(&victim.key), "{source}");
        }
        other => panic!("expected an interrupted discussion, got {other:?}"),
    }
}
