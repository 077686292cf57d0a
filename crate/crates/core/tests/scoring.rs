mod common;

use std::collections::BTreeMap;

use newsgap::discussion::{ComprehensionResponse, Condition};
use newsgap::evaluation::metrics::{cosine_similarity, rouge_l, RougeScore, RougeVariant};
use newsgap::evaluation::{improvement, score_response, EvalError};
use newsgap::llm::simulated::{hashed_embedding, DEFAULT_DIM};

fn oracle_cosine(a: &str, b: &str) -> f64 {
    let (x, y) = (hashed_embedding(a, DEFAULT_DIM), hashed_embedding(b, DEFAULT_DIM));
    let dot: f64 = x.iter().zip(&y).map(|(p, q)| p * q).sum();
    let n = |v: &[f64]| v.iter().map(|p| p * p).sum::<f64>().sqrt();
    dot / (n(&x) * n(&y))
}

#[test]
fn scores_match_direct_computation_and_flag_fallbacks() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let article = &corpus.articles[0];
    let labels = article.segment_labels();
    let covered = &labels[0];
    let mut per_segment = BTreeMap::new();
    per_segment.insert(covered.clone(), "Banks reported more late loan payments.".to_owned());
    let response = ComprehensionResponse {
        agent_id: "reader".into(),
        article_id: article.id.clone(),
        condition: Condition::Vanilla,
        whole_text: "Drought hurt harvests and lenders; a court let a lawsuit proceed.".into(),
        per_segment_texts: per_segment.clone(),
        declared_questions: vec![],
        declared_uncertainties: vec![],
    };
    let r = score_response(&response, article, &provider, RougeVariant::RougeL).unwrap();
    assert_eq!(r.condition, Condition::Vanilla);
    assert_eq!(r.per_segment.len(), labels.len());

    let whole_rouge: RougeScore<f64> = rouge_l(&response.whole_text, &article.body);
    assert!((r.whole_article.cosine - oracle_cosine(&response.whole_text, &article.body)).abs() < 1e-12);
    assert_eq!(r.whole_article.rouge_f1, whole_rouge.f1);
    for label in &labels {
        let s = &r.per_segment[label];
        let reference = article.segment_text(label).unwrap();
        let candidate = per_segment.get(label).unwrap_or(&response.whole_text);
        assert_eq!(s.fallback, label != covered, "{label}");
        assert!((s.scores.cosine - oracle_cosine(candidate, &reference)).abs() < 1e-12);
        let rl: RougeScore<f64> = rouge_l(candidate, &reference);
        assert_eq!(s.scores.rouge_f1, rl.f1);
        assert_eq!(s.scores.rouge_precision, rl.precision);
    }
    let direct = cosine_similarity(
        &hashed_embedding(&response.whole_text, DEFAULT_DIM),
        &hashed_embedding(&article.body, DEFAULT_DIM),
    )
    .unwrap();
    assert!((direct - r.whole_article.cosine).abs() < 1e-12);
}

#[test]
fn improvement_needs_matching_results() {
    let provider = common::simulated();
    let corpus = common::demo_corpus(&provider);
    let article = &corpus.articles[0];
    let response = |agent: &str, condition, text: &str| ComprehensionResponse {
        agent_id: agent.into(),
        article_id: article.id.clone(),
        condition,
        whole_text: text.into(),
        per_segment_texts: BTreeMap::new(),
        declared_questions: vec![],
        declared_uncertainties: vec![],
    };
    let score = |r: &ComprehensionResponse| score_response(r, article, &provider, RougeVariant::RougeL).unwrap();
    let base = score(&response("a", Condition::Original, "banks and courts"));
    let treated = score(&response("a", Condition::Discussion, &article.body));
    let other = score(&response("b", Condition::Discussion, &article.body));

    let up = improvement(&base, &treated).unwrap();
    assert!((up.delta_cosine - (treated.whole_article.cosine - base.whole_article.cosine)).abs() < 1e-15);
    assert!(up.delta_cosine > 0.0);
    assert!(matches!(improvement(&base, &other), Err(EvalError::Mismatch(_))));

    let mut foreign = response("a", Condition::Original, "x");
    foreign.article_id = "elsewhere".into();
    assert!(matches!(
        score_response(&foreign, article, &provider, RougeVariant::RougeL),
        Err(EvalError::Mismatch(_))
    ));
}
