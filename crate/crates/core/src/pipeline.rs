//! Operator-level commands: validate inputs, run the experiment or the round
//! sweep, and write every artifact plus a hash manifest under
//! `output_dir/run_id/`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;
use tracing::info;

use crate::config::ExperimentConfig;
use crate::corpus::{load_corpus_with_domains, segment_article, Corpus, DomainSet, SegmentError};
use crate::evaluation::records::{improvements_csv, results_csv, sweep_csv, ttests_csv};
use crate::evaluation::{iteration_sweep, run_experiment, EvalError, EvaluationResult, ExperimentOutput, SweepOutput};
use crate::llm::Provider;
use crate::llm::{LlmError, ProviderMode};
use crate::memory::{load_profile, AgentProfile, ProceduralMemory};
use crate::reporting::{render, table_conditions_by_agent, table_granular, table_improvements, Format, ReportTable};

pub const MANIFEST: &str = "manifest.json";

/// Exit status for configuration and input problems.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for failures while running.
pub const EXIT_RUNTIME: i32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n{}", .0.iter().map(|i| format!("  - {i}")).collect::<Vec<_>>().join("\n"))]
    Validation(Vec<String>),
    #[error(transparent)]
    Provider(#[from] LlmError),
    #[error(transparent)]
    Segment(#[from] SegmentError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Validation(_) => EXIT_VALIDATION,
            _ => EXIT_RUNTIME,
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// A validated configuration with its corpus and agents loaded.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub config: ExperimentConfig,
    pub domains: DomainSet,
    pub corpus: Corpus,
    pub agents: Vec<AgentProfile>,
}

/// Checks the configuration, every referenced file and the cross-references
/// between them. All problems are collected before returning.
pub fn validate(config: &ExperimentConfig) -> Result<Inputs, Vec<String>> {
    let mut issues = config.check();
    let domains = config.domains().unwrap_or_default();

    let corpus = if config.corpus_path.is_file() {
        load_corpus_with_domains(&config.corpus_path, domains.clone())
            .map_err(|e| issues.push(format!("corpus: {e}")))
            .ok()
    } else {
        issues.push(format!("corpus file {} does not exist", config.corpus_path.display()));
        None
    };
    if corpus.as_ref().is_some_and(|c| c.articles.is_empty()) {
        issues.push("corpus has no articles".into());
    }

    let mut agents = Vec::new();
    let mut ids = BTreeSet::new();
    for path in &config.agent_profile_paths {
        if !path.is_file() {
            issues.push(format!("agent profile {} does not exist", path.display()));
            continue;
        }
        match load_profile(path) {
            Ok(p) => {
                if let Err(e) = p.validate(&domains) {
                    issues.push(format!("agent profile {}: {e}", path.display()));
                }
                if !ids.insert(p.id.clone()) {
                    issues.push(format!("agent id `{}` is used by more than one profile", p.id));
                }
                agents.push(p);
            }
            Err(e) => issues.push(format!("agent profile {}: {e}", path.display())),
        }
    }

    match config.provider.mode {
        ProviderMode::Replay => {
            if let Some(d) = &config.provider.fixture_dir {
                if !d.is_dir() {
                    issues.push(format!("fixture directory {} does not exist", d.display()));
                }
            }
        }
        ProviderMode::Live | ProviderMode::Record => {
            let name = &config.provider.api_key_env_name;
            if std::env::var(name).map_or(true, |v| v.is_empty()) {
                issues.push(format!(
                    "{:?} mode needs the API key in environment variable {name}",
                    config.provider.mode
                ));
            }
        }
    }

    match (issues.is_empty(), corpus) {
        (true, Some(corpus)) => Ok(Inputs {
            config: config.clone(),
            domains,
            corpus,
            agents,
        }),
        _ => Err(issues),
    }
}

/// Labels the segments of every article that has none.
pub fn segment_corpus(corpus: &Corpus, provider: &Provider) -> Result<Corpus, PipelineError> {
    let templates = ProceduralMemory::defaults();
    let articles = corpus
        .articles
        .iter()
        .map(|a| segment_article(a, &corpus.domain_set, provider, &templates))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Corpus {
        articles,
        domain_set: corpus.domain_set.clone(),
    })
}

fn write(dir: &Path, name: &str, content: &str) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| io_err(&path, e))
}

fn json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

/// Prepares an empty run directory. An existing directory is only replaced
/// when it holds a manifest, i.e. when it is a previous run.
fn fresh_dir(dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        if !dir.join(MANIFEST).is_file() {
            return Err(PipelineError::Io {
                path: dir.to_path_buf(),
                message: "exists and does not look like a previous run (no manifest); refusing to overwrite".into(),
            });
        }
        fs::remove_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    article_id: &'a str,
    stage: &'a str,
    message: &'a str,
}

fn write_tables(
    dir: &Path,
    results: &[EvaluationResult],
    out: &ExperimentOutput,
    domains: &DomainSet,
    precision: usize,
    errors: &mut Vec<String>,
) -> Result<(), PipelineError> {
    let tables: [(&str, Result<ReportTable, _>); 3] = [
        ("table_conditions", table_conditions_by_agent(results)),
        ("table_granular", table_granular(results, Some(domains))),
        ("table_improvements", table_improvements(&out.improvements, &out.ttests)),
    ];
    for (name, table) in tables {
        match table {
            Ok(t) => {
                let t = t.with_precision(precision);
                for f in [Format::Csv, Format::Markdown] {
                    write(dir, &format!("{name}.{}", f.extension()), &render(&t, f))?;
                }
            }
            Err(e) => errors.push(
                serde_json::to_string(&ErrorRecord {
                    article_id: "",
                    stage: &format!("report:{name}"),
                    message: &e.to_string(),
                })
                .expect("error record serializes"),
            ),
        }
    }
    Ok(())
}

/// Writes every artifact of one experiment into `dir` (which must exist),
/// then the manifest.
pub fn write_experiment(
    dir: &Path,
    run_id: &str,
    out: &ExperimentOutput,
    domains: &DomainSet,
    precision: usize,
) -> Result<Manifest, PipelineError> {
    for a in &out.articles {
        write(
            dir,
            &format!("transcript_{}.json", a.article_id),
            &a.transcript.to_json(),
        )?;
        write(dir, &format!("gaps_{}.json", a.article_id), &json_line(&a.gaps))?;
        write(
            dir,
            &format!("supplement_vanilla_{}.json", a.article_id),
            &a.vanilla_supplement.to_json(),
        )?;
        write(
            dir,
            &format!("supplement_discussion_{}.json", a.article_id),
            &a.discussion_supplement.to_json(),
        )?;
    }
    let results: Vec<EvaluationResult> = out.results().cloned().collect();
    write(dir, &format!("results_{run_id}.csv"), &results_csv(&results))?;
    write(
        dir,
        &format!("improvements_{run_id}.csv"),
        &improvements_csv(&out.improvements),
    )?;
    write(dir, &format!("ttests_{run_id}.csv"), &ttests_csv(&out.ttests))?;

    let mut errors: Vec<String> = Vec::new();
    for f in &out.failures {
        errors.push(
            serde_json::to_string(&ErrorRecord {
                article_id: &f.article_id,
                stage: &f.stage,
                message: &f.message,
            })
            .expect("error record serializes"),
        );
        if let Some(t) = &f.partial_transcript {
            write(dir, &format!("transcript_{}.partial.json", f.article_id), &t.to_json())?;
        }
    }
    write_tables(dir, &results, out, domains, precision, &mut errors)?;
    if !errors.is_empty() {
        let mut body = errors.join("\n");
        body.push('\n');
        write(dir, &format!("errors_{run_id}.jsonl"), &body)?;
    }
    write_manifest(dir, run_id)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        json_line(self)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    for entry in fs::read_dir(dir).map_err(|e| io_err(dir, e))? {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path != root.join(MANIFEST) {
            out.push(path);
        }
    }
    Ok(())
}

fn sha256_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .expect("file under root")
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Hashes every file under `dir` (recursively, except the top-level
/// manifest) and writes `manifest.json`, sorted by path.
pub fn write_manifest(dir: &Path, run_id: &str) -> Result<Manifest, PipelineError> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    let mut entries = files
        .iter()
        .map(|p| {
            Ok(ManifestEntry {
                path: relative(dir, p),
                sha256: sha256_file(p)?,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        run_id: run_id.to_owned(),
        files: entries,
    };
    write(dir, MANIFEST, &manifest.to_json())?;
    Ok(manifest)
}

/// Re-hashes the files listed in `dir/manifest.json`; returns one message per
/// missing, changed or unlisted file.
pub fn verify_manifest(dir: &Path) -> Result<Vec<String>, PipelineError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| io_err(&path, e))?;
    let mut problems = Vec::new();
    let mut listed = BTreeSet::new();
    for entry in &manifest.files {
        listed.insert(entry.path.clone());
        let file = dir.join(&entry.path);
        if !file.is_file() {
            problems.push(format!("{}: missing", entry.path));
        } else if sha256_file(&file)? != entry.sha256 {
            problems.push(format!("{}: hash mismatch", entry.path));
        }
    }
    let mut present = Vec::new();
    collect_files(dir, dir, &mut present)?;
    for p in present {
        let rel = relative(dir, &p);
        if !listed.contains(&rel) {
            problems.push(format!("{rel}: not in manifest"));
        }
    }
    Ok(problems)
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub run_dir: PathBuf,
    pub manifest: Manifest,
    pub articles_ok: usize,
    pub articles_failed: usize,
}

/// Full experiment with artifacts under `output_dir/run_id/`.
pub fn run(inputs: &Inputs, provider: &Provider) -> Result<RunReport, PipelineError> {
    let corpus = segment_corpus(&inputs.corpus, provider)?;
    let out = run_experiment(&corpus, &inputs.agents, &inputs.config.settings(), provider)?;
    let dir = inputs.config.run_dir();
    fresh_dir(&dir)?;
    let manifest = write_experiment(
        &dir,
        &inputs.config.run_id,
        &out,
        &inputs.domains,
        inputs.config.precision,
    )?;
    info!(dir = %dir.display(), files = manifest.files.len(), "run written");
    Ok(RunReport {
        run_dir: dir,
        manifest,
        articles_ok: out.articles.len(),
        articles_failed: out.failures.len(),
    })
}

/// Round sweep: one sub-run per round count under `round_<r>/`, plus
/// `sweep_<run_id>.csv` and a manifest over everything.
pub fn sweep(inputs: &Inputs, provider: &Provider) -> Result<(RunReport, SweepOutput), PipelineError> {
    let config = &inputs.config;
    if config.max_rounds_sweep < 1 {
        return Err(PipelineError::Validation(vec!["max_rounds_sweep must be >= 1".into()]));
    }
    let corpus = segment_corpus(&inputs.corpus, provider)?;
    let result = iteration_sweep(
        &corpus,
        &inputs.agents,
        config.max_rounds_sweep,
        &config.settings(),
        provider,
    )?;
    let dir = config.run_dir();
    fresh_dir(&dir)?;
    for (round, out) in &result.runs {
        let sub = dir.join(format!("round_{round}"));
        fs::create_dir_all(&sub).map_err(|e| io_err(&sub, e))?;
        write_experiment(&sub, &config.run_id, out, &inputs.domains, config.precision)?;
    }
    write(
        &dir,
        &format!("sweep_{}.csv", config.run_id),
        &sweep_csv(&result.points),
    )?;
    let manifest = write_manifest(&dir, &config.run_id)?;
    let last = result.runs.last().map(|(_, o)| o);
    Ok((
        RunReport {
            run_dir: dir,
            manifest,
            articles_ok: last.map_or(0, |o| o.articles.len()),
            articles_failed: last.map_or(0, |o| o.failures.len()),
        },
        result,
    ))
}
