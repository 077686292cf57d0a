use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::metrics::RougeVariant;
use super::scoring::{control_read, improvement, score_response, EvaluationResult, ImprovementRecord, Treatment};
use super::stats::{paired_t_test, StatsError, TTestResult};
use super::EvalError;
use crate::corpus::{Corpus, NewsArticle};
use crate::discussion::{
    extract_gaps, Condition, Discussion, DiscussionError, DiscussionSettings, DiscussionTranscript, Gap,
};
use crate::llm::Provider;
use crate::memory::{embed_store, AgentProfile};
use crate::supplement::{generate_discussion_supplement, generate_vanilla_supplement, SupplementaryMaterial};

/// Default round count; improvement curves flatten after the third round.
pub const DEFAULT_ROUNDS: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub n_rounds: usize,
    pub alpha: f64,
    pub rouge_variant: RougeVariant,
    pub discussion: DiscussionSettings,
    /// Articles processed in parallel; 0 lets the thread pool decide.
    pub jobs: usize,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        Self {
            n_rounds: DEFAULT_ROUNDS,
            alpha: DEFAULT_ALPHA,
            rouge_variant: RougeVariant::default(),
            discussion: DiscussionSettings::default(),
            jobs: 0,
        }
    }
}

/// Everything produced for one article.
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleRun {
    pub article_id: String,
    pub transcript: DiscussionTranscript,
    pub gaps: Vec<Gap>,
    pub vanilla_supplement: SupplementaryMaterial,
    pub discussion_supplement: SupplementaryMaterial,
    /// Conditions in the order original, vanilla, discussion; agents in
    /// configuration order within each.
    pub results: Vec<EvaluationResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArticleFailure {
    pub article_id: String,
    pub stage: String,
    pub message: String,
    #[serde(skip)]
    pub partial_transcript: Option<Box<DiscussionTranscript>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestRow {
    pub agent_id: String,
    pub condition: Treatment,
    pub result: Option<TTestResult<f64>>,
    /// Why no test was run, when `result` is `None`.
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub articles: Vec<ArticleRun>,
    pub failures: Vec<ArticleFailure>,
    pub improvements: Vec<ImprovementRecord>,
    pub ttests: Vec<TTestRow>,
}

impl ExperimentOutput {
    pub fn results(&self) -> impl Iterator<Item = &EvaluationResult> {
        self.articles.iter().flat_map(|a| a.results.iter())
    }
}

/// Copies of `agents` with every memory entry embedded.
pub fn prepare_agents(agents: &[AgentProfile], provider: &Provider) -> Result<Vec<AgentProfile>, EvalError> {
    agents
        .iter()
        .map(|a| {
            let mut a = a.clone();
            a.memory = embed_store(&a.memory, provider)?;
            Ok(a)
        })
        .collect()
}

fn fail(article: &NewsArticle, stage: impl Into<String>, error: impl std::fmt::Display) -> ArticleFailure {
    ArticleFailure {
        article_id: article.id.clone(),
        stage: stage.into(),
        message: error.to_string(),
        partial_transcript: None,
    }
}

fn run_article(
    article: &NewsArticle,
    agents: &[AgentProfile],
    settings: &ExperimentSettings,
    corpus: &Corpus,
    provider: &Provider,
) -> Result<ArticleRun, ArticleFailure> {
    let discussion = Discussion::new(provider, &corpus.domain_set).with_settings(settings.discussion);
    let transcript = match discussion.run_discussion(agents, article, settings.n_rounds) {
        Ok(t) => t,
        Err(DiscussionError::Interrupted { partial, source }) => {
            let mut f = fail(article, "discussion", source);
            f.partial_transcript = Some(partial);
            return Err(f);
        }
        Err(e) => return Err(fail(article, "discussion", e)),
    };
    let gaps = extract_gaps(&transcript);
    let vanilla =
        generate_vanilla_supplement(&discussion, article).map_err(|e| fail(article, "vanilla_supplement", e))?;
    let informed = generate_discussion_supplement(&discussion, article, &transcript, &gaps)
        .map_err(|e| fail(article, "discussion_supplement", e))?;

    let mut results = Vec::with_capacity(agents.len() * 3);
    for (condition, supplement) in [
        (Condition::Original, None),
        (Condition::Vanilla, Some(&vanilla)),
        (Condition::Discussion, Some(&informed)),
    ] {
        for agent in agents {
            let stage = format!("control_read:{condition}:{}", agent.id);
            let response =
                control_read(&discussion, agent, article, supplement).map_err(|e| fail(article, &stage, e))?;
            let scored = score_response(&response, article, provider, settings.rouge_variant)
                .map_err(|e| fail(article, format!("score:{condition}:{}", agent.id), e))?;
            results.push(scored);
        }
    }
    Ok(ArticleRun {
        article_id: article.id.clone(),
        transcript,
        gaps,
        vanilla_supplement: vanilla,
        discussion_supplement: informed,
        results,
    })
}

fn check(corpus: &Corpus, agents: &[AgentProfile], settings: &ExperimentSettings) -> Result<(), EvalError> {
    if settings.n_rounds < 1 {
        return Err(EvalError::Precondition("n_rounds must be >= 1".into()));
    }
    if !(settings.alpha > 0.0 && settings.alpha < 1.0) {
        return Err(EvalError::Precondition(format!(
            "alpha must lie in (0, 1), got {}",
            settings.alpha
        )));
    }
    if agents.len() < 2 {
        return Err(EvalError::Precondition(
            "an experiment needs at least two agents".into(),
        ));
    }
    if corpus.articles.is_empty() {
        return Err(EvalError::Precondition("corpus has no articles".into()));
    }
    if let Some(a) = corpus.articles.iter().find(|a| a.segments.is_empty()) {
        return Err(EvalError::Precondition(format!("article `{}` is not segmented", a.id)));
    }
    Ok(())
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, EvalError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| EvalError::Precondition(format!("cannot start worker pool: {e}")))
}

/// Full protocol for every article: discussion, both supplements, control
/// readings under the three conditions, scores, improvements and t-tests.
/// Articles run in parallel and fail independently; the run fails only when
/// no article succeeds.
pub fn run_experiment(
    corpus: &Corpus,
    agents: &[AgentProfile],
    settings: &ExperimentSettings,
    provider: &Provider,
) -> Result<ExperimentOutput, EvalError> {
    check(corpus, agents, settings)?;
    let agents = prepare_agents(agents, provider)?;
    let outcomes: Vec<Result<ArticleRun, ArticleFailure>> = pool(settings.jobs)?.install(|| {
        corpus
            .articles
            .par_iter()
            .map(|a| run_article(a, &agents, settings, corpus, provider))
            .collect()
    });
    let mut articles = Vec::new();
    let mut failures = Vec::new();
    for o in outcomes {
        match o {
            Ok(a) => articles.push(a),
            Err(f) => {
                warn!(article = %f.article_id, stage = %f.stage, error = %f.message, "article failed");
                failures.push(f);
            }
        }
    }
    if articles.is_empty() {
        return Err(EvalError::AllArticlesFailed(failures));
    }

    let mut improvements = Vec::new();
    for run in &articles {
        for baseline in run.results.iter().filter(|r| r.condition == Condition::Original) {
            for treated in run
                .results
                .iter()
                .filter(|r| r.agent_id == baseline.agent_id && r.condition != Condition::Original)
            {
                improvements.push(improvement(baseline, treated)?);
            }
        }
    }

    let mut ttests = Vec::new();
    for agent in &agents {
        for treatment in Treatment::ALL {
            let deltas: Vec<f64> = improvements
                .iter()
                .filter(|i| i.agent_id == agent.id && i.condition == treatment)
                .map(|i| i.delta_cosine)
                .collect();
            let (result, note) = match paired_t_test(&deltas, settings.alpha) {
                Ok(r) => (Some(r), String::new()),
                Err(StatsError::TooFewSamples(n)) => (None, format!("skipped: {n} article(s), need at least 2")),
                Err(e) => (None, format!("skipped: {e}")),
            };
            ttests.push(TTestRow {
                agent_id: agent.id.clone(),
                condition: treatment,
                result,
                note,
            });
        }
    }
    info!(ok = articles.len(), failed = failures.len(), "experiment finished");
    Ok(ExperimentOutput {
        articles,
        failures,
        improvements,
        ttests,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub round: usize,
    pub agent_id: String,
    pub mean_cosine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub points: Vec<SweepPoint>,
    /// Full run for each round count, in increasing order.
    pub runs: Vec<(usize, ExperimentOutput)>,
}

impl SweepOutput {
    /// Mean cosine per round for one agent.
    pub fn series(&self, agent_id: &str) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.agent_id == agent_id)
            .map(|p| p.mean_cosine)
            .collect()
    }
}

/// Runs the whole experiment with 1, 2, ..., `max_rounds` rounds and records
/// each agent's mean whole-article cosine under the discussion condition.
pub fn iteration_sweep(
    corpus: &Corpus,
    agents: &[AgentProfile],
    max_rounds: usize,
    settings: &ExperimentSettings,
    provider: &Provider,
) -> Result<SweepOutput, EvalError> {
    if max_rounds < 1 {
        return Err(EvalError::Precondition("max_rounds must be >= 1".into()));
    }
    let mut points = Vec::new();
    let mut runs = Vec::new();
    for round in 1..=max_rounds {
        let out = run_experiment(
            corpus,
            agents,
            &ExperimentSettings {
                n_rounds: round,
                ..*settings
            },
            provider,
        )?;
        for agent in agents {
            let scores: Vec<f64> = out
                .results()
                .filter(|r| r.agent_id == agent.id && r.condition == Condition::Discussion)
                .map(|r| r.whole_article.cosine)
                .collect();
            if !scores.is_empty() {
                points.push(SweepPoint {
                    round,
                    agent_id: agent.id.clone(),
                    mean_cosine: scores.iter().sum::<f64>() / scores.len() as f64,
                });
            }
        }
        runs.push((round, out));
    }
    Ok(SweepOutput { points, runs })
}
