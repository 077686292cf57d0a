//! CSV serializations of result sets. Column sets and order are fixed:
//!
//! * results: `article_id, agent_id, condition, scope, segment, fallback,
//!   cosine, rouge_precision, rouge_recall, rouge_f1` (scope is `whole` or
//!   `segment`; one row per agent x article x condition x scope)
//! * improvements: `article_id, agent_id, condition, delta_cosine`
//! * ttests: `agent_id, condition, n, mean_delta, t_statistic, p_value,
//!   alpha, significant, degenerate, note`
//! * sweep: `round, agent_id, mean_cosine`
//!
//! Reals are written with the shortest representation that round-trips.

use super::experiment::{SweepPoint, TTestRow};
use super::metrics::ScorePair;
use super::scoring::{EvaluationResult, ImprovementRecord};

fn writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 fields")
}

fn score_fields(s: &ScorePair<f64>) -> [String; 4] {
    [
        s.cosine.to_string(),
        s.rouge_precision.to_string(),
        s.rouge_recall.to_string(),
        s.rouge_f1.to_string(),
    ]
}

pub const RESULTS_HEADER: [&str; 10] = [
    "article_id",
    "agent_id",
    "condition",
    "scope",
    "segment",
    "fallback",
    "cosine",
    "rouge_precision",
    "rouge_recall",
    "rouge_f1",
];

pub fn results_csv<'a>(results: impl IntoIterator<Item = &'a EvaluationResult>) -> String {
    let mut w = writer();
    w.write_record(RESULTS_HEADER).expect("in-memory write");
    for r in results {
        let lead = [r.article_id.as_str(), r.agent_id.as_str(), r.condition.as_str()];
        let [c, p, rc, f] = score_fields(&r.whole_article);
        w.write_record(lead.iter().copied().chain(["whole", "", "false", &c, &p, &rc, &f]))
            .expect("in-memory write");
        for (label, s) in &r.per_segment {
            let [c, p, rc, f] = score_fields(&s.scores);
            let fallback = s.fallback.to_string();
            w.write_record(
                lead.iter()
                    .copied()
                    .chain(["segment", label.as_str(), &fallback, &c, &p, &rc, &f]),
            )
            .expect("in-memory write");
        }
    }
    finish(w)
}

pub fn improvements_csv(improvements: &[ImprovementRecord]) -> String {
    let mut w = writer();
    w.write_record(["article_id", "agent_id", "condition", "delta_cosine"])
        .expect("in-memory write");
    for i in improvements {
        w.write_record([
            i.article_id.as_str(),
            i.agent_id.as_str(),
            i.condition.as_str(),
            &i.delta_cosine.to_string(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}

pub fn ttests_csv(rows: &[TTestRow]) -> String {
    let mut w = writer();
    w.write_record([
        "agent_id",
        "condition",
        "n",
        "mean_delta",
        "t_statistic",
        "p_value",
        "alpha",
        "significant",
        "degenerate",
        "note",
    ])
    .expect("in-memory write");
    for row in rows {
        let stats: [String; 7] = match &row.result {
            Some(t) => [
                t.n.to_string(),
                t.mean_delta.to_string(),
                t.t_statistic.to_string(),
                t.p_value.to_string(),
                t.alpha.to_string(),
                t.significant.to_string(),
                t.degenerate.to_string(),
            ],
            None => Default::default(),
        };
        let mut record = vec![row.agent_id.clone(), row.condition.as_str().to_owned()];
        record.extend(stats);
        record.push(row.note.clone());
        w.write_record(&record).expect("in-memory write");
    }
    finish(w)
}

pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut w = writer();
    w.write_record(["round", "agent_id", "mean_cosine"])
        .expect("in-memory write");
    for p in points {
        w.write_record([p.round.to_string(), p.agent_id.clone(), p.mean_cosine.to_string()])
            .expect("in-memory write");
    }
    finish(w)
}
