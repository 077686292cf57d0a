//! One PASS/FAIL line per acceptance criterion. Runs without the libtest
//! harness so the lines are always printed; any failure exits non-zero.

mod common;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use newsgap::corpus::DomainLabel;
use newsgap::discussion::{normalize_question, Condition};
use newsgap::evaluation::metrics::{cosine_similarity, rouge_l, rouge_l_tokens, RougeScore, ScorePair};
use newsgap::evaluation::stats::paired_t_test;
use newsgap::evaluation::{
    iteration_sweep, run_experiment, EvaluationResult, ImprovementRecord, SegmentScore, Treatment,
};
use newsgap::llm::mock_server::MockServer;
use newsgap::llm::simulated::SimulatedBackend;
use newsgap::llm::{HttpBackend, Provider, ProviderMode};
use newsgap::pipeline;
use newsgap::reporting::{granular_row, table_conditions_by_agent, table_granular, table_improvements};
use num_rational::Ratio;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// Memoized recursion over suffixes; deliberately a different formulation
// from the library's two-row table.
fn lcs_oracle(a: &[u8], b: &[u8], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let key = (a.len(), b.len());
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let v = if a[0] == b[0] {
        1 + lcs_oracle(&a[1..], &b[1..], memo)
    } else {
        lcs_oracle(&a[1..], b, memo).max(lcs_oracle(a, &b[1..], memo))
    };
    memo.insert(key, v);
    v
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    for case in 0..1000 {
        let la = rng.random_range(0..=12);
        let lb = rng.random_range(0..=12);
        let vocab = rng.random_range(1..=8u8);
        let a: Vec<u8> = (0..la).map(|_| rng.random_range(0..vocab)).collect();
        let b: Vec<u8> = (0..lb).map(|_| rng.random_range(0..vocab)).collect();
        let l = lcs_oracle(&a, &b, &mut HashMap::new()) as i64;
        let expected = if la == 0 || lb == 0 || l == 0 {
            Ratio::from_integer(0)
        } else {
            Ratio::new(2 * l, la as i64 + lb as i64)
        };
        let got: RougeScore<Ratio<i64>> = rouge_l_tokens(&a, &b);
        ensure(got.f1 == expected, || {
            format!("case {case}: rouge-L {a:?} vs {b:?} gave {} not {expected}", got.f1)
        })?;
        let float: RougeScore<f64> = rouge_l_tokens(&a, &b);
        let exact = *expected.numer() as f64 / *expected.denom() as f64;
        ensure((float.f1 - exact).abs() <= 1e-15, || {
            format!("case {case}: float rouge-L {} vs {exact}", float.f1)
        })?;
    }
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let dim = rng.random_range(1..=64);
        let a: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        let expected = dot / (na * nb);
        let got = cosine_similarity(&a, &b).map_err(|e| format!("case {case}: {e}"))?;
        worst = worst.max((got - expected).abs());
    }
    ensure(worst <= 1e-12, || format!("cosine deviates by {worst:e}"))?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "1000 ROUGE-L pairs exact, 1000 cosine pairs max dev {worst:.1e}, {elapsed:.2?}"
    ))
}

#[allow(clippy::approx_constant)]
fn worked_values() -> Outcome {
    let r: RougeScore<f64> = rouge_l("the cat sat", "the cat lay down");
    ensure((r.f1 - 4.0 / 7.0).abs() <= 1e-12, || format!("ROUGE-L F1 {}", r.f1))?;
    let c: f64 = cosine_similarity(&[1.0, 1.0, 0.0], &[1.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    ensure((c - 0.70710678).abs() <= 1e-8, || format!("cosine {c}"))?;
    Ok(format!("F1 {:.12}, cosine {c:.8}", r.f1))
}

// Student t CDF with three degrees of freedom, closed form.
fn t3_cdf(t: f64) -> f64 {
    let u = t / 3f64.sqrt();
    0.5 + (u / (1.0 + u * u) + u.atan()) / std::f64::consts::PI
}

fn statistics() -> Outcome {
    let deltas = [0.1, 0.2, 0.15, 0.05];
    let n = deltas.len() as f64;
    let mean = deltas.iter().sum::<f64>() / n;
    let sd = (deltas.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let t_expected = mean / (sd / n.sqrt());
    let p_expected = 2.0 * (1.0 - t3_cdf(t_expected.abs()));
    let r = paired_t_test(&deltas, 0.05).map_err(|e| e.to_string())?;
    ensure((r.t_statistic - t_expected).abs() <= 1e-6, || {
        format!("t {} vs {t_expected}", r.t_statistic)
    })?;
    ensure((r.p_value - p_expected).abs() <= 1e-6, || {
        format!("p {} vs {p_expected}", r.p_value)
    })?;

    let z = paired_t_test(&[0.0; 5], 0.05).map_err(|e| e.to_string())?;
    ensure(z.t_statistic == 0.0 && z.p_value == 1.0, || {
        format!("zero deltas gave t={} p={}", z.t_statistic, z.p_value)
    })?;

    let mut rng = StdRng::seed_from_u64(7);
    for case in 0..100 {
        let len = rng.random_range(2..=30);
        let d: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let neg: Vec<f64> = d.iter().map(|x| -x).collect();
        let a = paired_t_test(&d, 0.05).map_err(|e| e.to_string())?;
        let b = paired_t_test(&neg, 0.05).map_err(|e| e.to_string())?;
        ensure(a.t_statistic == -b.t_statistic && a.p_value == b.p_value, || {
            format!(
                "case {case}: ({}, {}) vs ({}, {})",
                a.t_statistic, a.p_value, b.t_statistic, b.p_value
            )
        })?;
    }
    Ok(format!(
        "t {:.6} p {:.6}; zero deltas t=0 p=1; 100 antisymmetric sets",
        r.t_statistic, r.p_value
    ))
}

fn determinism() -> Outcome {
    let start = Instant::now();
    let mut manifests = Vec::new();
    for _ in 0..2 {
        let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
        let inputs = common::demo_inputs(tmp.path());
        let provider = common::replay_provider(&inputs);
        let report = pipeline::run(&inputs, &provider).map_err(|e| e.to_string())?;
        ensure(provider.network_calls() == 0, || "replay touched the network".into())?;
        ensure(report.articles_ok == 2 && report.articles_failed == 0, || {
            "demo corpus did not fully succeed".into()
        })?;
        let bytes = std::fs::read(report.run_dir.join(pipeline::MANIFEST)).map_err(|e| e.to_string())?;
        manifests.push((bytes, report.manifest.files.len()));
    }
    ensure(manifests[0].0 == manifests[1].0, || "manifests differ".into())?;
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{} files hashed identically, {elapsed:.2?}", manifests[0].1))
}

fn protocol_shape() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inputs = common::demo_inputs(tmp.path());
    ensure(inputs.agents.len() == 4 && inputs.config.n_rounds == 3, || {
        "demo is not 4 agents x 3 rounds".into()
    })?;
    let provider = common::replay_provider(&inputs);
    let corpus = pipeline::segment_corpus(&inputs.corpus, &provider).map_err(|e| e.to_string())?;
    let out =
        run_experiment(&corpus, &inputs.agents, &inputs.config.settings(), &provider).map_err(|e| e.to_string())?;
    for a in &out.articles {
        let t = &a.transcript;
        ensure(t.rounds.len() == 3, || {
            format!("{}: {} rounds", a.article_id, t.rounds.len())
        })?;
        for (i, r) in t.rounds.iter().enumerate() {
            ensure(r.utterances.len() == 4, || {
                format!("{} round {i}: {} utterances", a.article_id, r.utterances.len())
            })?;
        }
        ensure(t.summaries().count() == 3, || format!("{}: summaries", a.article_id))?;
        ensure(a.results.len() == 4 * 3, || {
            format!("{}: {} results", a.article_id, a.results.len())
        })?;
        for c in Condition::ALL {
            let n = a.results.iter().filter(|r| r.condition == c).count();
            ensure(n == 4, || format!("{}: {n} results for {c}", a.article_id))?;
        }
    }
    Ok(format!(
        "{} articles: 3 rounds x 4 utterances, 3 summaries, 12 results each",
        out.articles.len()
    ))
}

fn gap_provenance() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inputs = common::demo_inputs(tmp.path());
    let provider = common::replay_provider(&inputs);
    let corpus = pipeline::segment_corpus(&inputs.corpus, &provider).map_err(|e| e.to_string())?;
    let out =
        run_experiment(&corpus, &inputs.agents, &inputs.config.settings(), &provider).map_err(|e| e.to_string())?;
    let (mut sections, mut gaps) = (0, 0);
    for a in &out.articles {
        for s in &a.discussion_supplement.sections {
            if let Some(id) = &s.gap_addressed {
                sections += 1;
                ensure(a.gaps.iter().any(|g| &g.id == id), || {
                    format!("{}: section cites unknown {id}", a.article_id)
                })?;
            }
        }
        let asked: Vec<String> = a
            .transcript
            .questions()
            .iter()
            .map(|q| normalize_question(q.text))
            .collect();
        for g in &a.gaps {
            gaps += 1;
            ensure(asked.contains(&normalize_question(&g.question)), || {
                format!("{}: gap {} not asked in the transcript", a.article_id, g.id)
            })?;
        }
    }
    ensure(sections > 0 && gaps > 0, || "fixtures produced no gaps to check".into())?;
    Ok(format!("{sections} gap-citing sections and {gaps} gaps traced"))
}

const AGENTS: [&str; 4] = ["Finance", "Law", "Agriculture", "Technology"];

// Published reference tables, transcribed: per condition, per agent.
const TABLE1: [[(f64, f64); 4]; 3] = [
    [(0.7022, 0.21), (0.5932, 0.19), (0.7273, 0.23), (0.1351, 0.12)],
    [(0.6128, 0.32), (0.6659, 0.29), (0.7834, 0.31), (0.2303, 0.20)],
    [(0.8139, 0.24), (0.7718, 0.22), (0.7936, 0.25), (0.7988, 0.28)],
];
const TABLE2: [[f64; 4]; 2] = [[0.0206, 0.0096, 0.0199, -0.0173], [0.1158, 0.0911, 0.1267, 0.3220]];
// Per segment, per condition, per agent.
const TABLE3: [[[f64; 4]; 3]; 4] = [
    [
        [0.7568, 0.0288, 0.4577, 0.0289],
        [0.6929, 0.0488, 0.7215, 0.0488],
        [0.8939, 0.6995, 0.7455, 0.8238],
    ],
    [
        [0.7511, 0.6751, 0.4967, 0.0666],
        [0.066, 0.6906, 0.38, 0.0665],
        [0.5409, 0.7295, 0.7045, 0.4473],
    ],
    [
        [0.7541, 0.4999, 0.5441, 0.0642],
        [0.701, 0.0748, 0.728, 0.0748],
        [0.8126, 0.7097, 0.9103, 0.7927],
    ],
    [
        [0.543, 0.1118, 0.5399, 0.1752],
        [0.1028, 0.1028, 0.3788, 0.0827],
        [0.7456, 0.7065, 0.7345, 0.8069],
    ],
];

fn pair(cosine: f64, f1: f64) -> ScorePair<f64> {
    ScorePair {
        cosine,
        rouge_precision: f1,
        rouge_recall: f1,
        rouge_f1: f1,
    }
}

fn table_fidelity() -> Outcome {
    let mut results = Vec::new();
    for (ci, c) in Condition::ALL.into_iter().enumerate() {
        for (ai, agent) in AGENTS.iter().enumerate() {
            let (cos, rouge) = TABLE1[ci][ai];
            let per_segment: BTreeMap<DomainLabel, SegmentScore> = AGENTS
                .iter()
                .enumerate()
                .map(|(si, seg)| {
                    let s = TABLE3[si][ci][ai];
                    (
                        DomainLabel::from(*seg),
                        SegmentScore {
                            scores: pair(s, 0.0),
                            fallback: false,
                        },
                    )
                })
                .collect();
            results.push(EvaluationResult {
                agent_id: agent.to_string(),
                article_id: "published".into(),
                condition: c,
                whole_article: pair(cos, rouge),
                per_segment,
            });
        }
    }
    let improvements: Vec<ImprovementRecord> = Treatment::ALL
        .into_iter()
        .enumerate()
        .flat_map(|(ti, t)| {
            AGENTS.iter().enumerate().map(move |(ai, agent)| ImprovementRecord {
                agent_id: agent.to_string(),
                article_id: "published".into(),
                condition: t,
                delta_cosine: TABLE2[ti][ai],
            })
        })
        .collect();

    let mut checked = 0;
    let mut check = |table: &newsgap::ReportTable, row: &str, col: &str, expected: f64| -> Result<(), String> {
        let want = format!("{expected:.4}");
        let got = table
            .rendered(row, col)
            .ok_or_else(|| format!("no cell {row} / {col}"))?;
        checked += 1;
        ensure(got == want, || format!("{row} / {col}: {got} != {want}"))
    };

    let t1 = table_conditions_by_agent(&results).map_err(|e| e.to_string())?;
    for (ci, c) in Condition::ALL.iter().enumerate() {
        for (ai, agent) in AGENTS.iter().enumerate() {
            check(&t1, c.as_str(), &format!("{agent} cosine"), TABLE1[ci][ai].0)?;
            check(&t1, c.as_str(), &format!("{agent} rouge"), TABLE1[ci][ai].1)?;
        }
    }
    let t2 = table_improvements(&improvements, &[]).map_err(|e| e.to_string())?;
    for (ti, t) in Treatment::ALL.iter().enumerate() {
        for (ai, agent) in AGENTS.iter().enumerate() {
            check(&t2, t.as_str(), agent, TABLE2[ti][ai])?;
        }
    }
    let t3 = table_granular(&results, None).map_err(|e| e.to_string())?;
    for (si, seg) in AGENTS.iter().enumerate() {
        for (ci, c) in Condition::ALL.into_iter().enumerate() {
            for (ai, agent) in AGENTS.iter().enumerate() {
                check(
                    &t3,
                    &granular_row(&DomainLabel::from(*seg), c),
                    agent,
                    TABLE3[si][ci][ai],
                )?;
            }
        }
    }
    let spot = [
        t1.rendered("discussion", "Finance cosine"),
        t2.rendered("discussion", "Technology"),
        t3.rendered("Technology part / discussion", "Finance"),
    ];
    Ok(format!(
        "{checked} cells verbatim; spot {:?}",
        spot.map(|s| s.unwrap_or_default())
    ))
}

fn sweep_plateau() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let inputs = common::demo_inputs(tmp.path());
    let provider = common::replay_provider(&inputs);
    let max = inputs.config.max_rounds_sweep;
    ensure(max >= 3, || format!("sweep covers only {max} rounds"))?;
    let corpus = pipeline::segment_corpus(&inputs.corpus, &provider).map_err(|e| e.to_string())?;
    let sweep = iteration_sweep(&corpus, &inputs.agents, max, &inputs.config.settings(), &provider)
        .map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for agent in &inputs.agents {
        let s: Vec<f64> = sweep.series(&agent.id);
        ensure(s.len() == max, || format!("{}: {} points", agent.id, s.len()))?;
        ensure(s.windows(2).all(|w| w[1] >= w[0]), || {
            format!("{}: decreasing {s:?}", agent.id)
        })?;
        let tail = (s[max - 1] - s[max - 2]).abs();
        ensure(tail < 0.01, || format!("{}: last step {tail}", agent.id))?;
        lines.push(format!("{} {:.4}->{:.4}", agent.id, s[0], s[max - 1]));
    }
    Ok(format!("rounds 1..={max}: {}", lines.join(", ")))
}

fn record_replay() -> Outcome {
    let server = MockServer::start(Arc::new(SimulatedBackend::default())).map_err(|e| e.to_string())?;
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = common::demo_inputs(tmp.path());
    let fixtures = tmp.path().join("fixtures");

    let mut rec = base.clone();
    rec.config.run_id = "rr".into();
    rec.config.output_dir = tmp.path().join("recorded");
    rec.config.provider.mode = ProviderMode::Record;
    rec.config.provider.base_url = server.base_url();
    rec.config.provider.fixture_dir = Some(fixtures.clone());
    let backend =
        HttpBackend::new(&server.base_url(), "test-key".into(), Duration::from_secs(30)).map_err(|e| e.to_string())?;
    let recorder = Provider::with_backend(rec.config.provider.clone(), Arc::new(backend)).map_err(|e| e.to_string())?;
    let recorded = pipeline::run(&rec, &recorder).map_err(|e| e.to_string())?;
    let calls = server.requests();
    ensure(calls > 0, || "recording made no requests".into())?;

    let mut rep = rec.clone();
    rep.config.output_dir = tmp.path().join("replayed");
    rep.config.provider.mode = ProviderMode::Replay;
    let replayer = Provider::from_config(rep.config.provider.clone()).map_err(|e| e.to_string())?;
    let replayed = pipeline::run(&rep, &replayer).map_err(|e| e.to_string())?;
    ensure(server.requests() == calls, || "replay reached the endpoint".into())?;

    let read = |dir: &std::path::Path| std::fs::read(dir.join(pipeline::MANIFEST)).map_err(|e| e.to_string());
    ensure(read(&recorded.run_dir)? == read(&replayed.run_dir)?, || {
        "manifests differ".into()
    })?;
    Ok(format!("{calls} HTTP requests recorded; replay manifest identical"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("metric oracle equivalence", metric_oracles),
        ("worked metric values", worked_values),
        ("statistics correctness", statistics),
        ("pipeline determinism", determinism),
        ("protocol shape", protocol_shape),
        ("gap provenance", gap_provenance),
        ("table fidelity", table_fidelity),
        ("sweep behavior", sweep_plateau),
        ("record/replay equivalence", record_replay),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(reason) => {
                failed += 1;
                println!("FAIL {name}: {reason}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
