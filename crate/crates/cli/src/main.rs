use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use newsgap::config::ExperimentConfig;
use newsgap::llm::{Provider, ProviderMode};
use newsgap::pipeline::{self, Inputs, RunReport, EXIT_RUNTIME, EXIT_VALIDATION};
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(
    name = "newsgap",
    version,
    about = "Multi-agent news discussion and supplement experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Log more (repeat for trace level). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configuration and inputs, then print the effective configuration.
    Validate(Common),
    /// Run discussion, supplements and control-group evaluation.
    Run(Common),
    /// Repeat the experiment for 1..=max_rounds_sweep rounds.
    Sweep(Common),
    /// Run against the live endpoint and store every response as a fixture.
    Record(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Provider mode: live, replay or record.
    #[arg(long)]
    mode: Option<ProviderMode>,
    /// Root directory for run artifacts.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Name of the run directory under the output directory.
    #[arg(long)]
    run_id: Option<String>,
    /// Articles processed in parallel (0 = one per logical processor).
    #[arg(long)]
    jobs: Option<usize>,
}

fn fail(code: i32, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code as u8)
}

fn load(common: &Common, forced_mode: Option<ProviderMode>) -> Result<Inputs, ExitCode> {
    let mut config = ExperimentConfig::load(&common.config).map_err(|e| fail(EXIT_VALIDATION, e))?;
    if let Some(mode) = forced_mode.or(common.mode) {
        config.provider.mode = mode;
    }
    if let Some(d) = &common.output_dir {
        config.output_dir = d.clone();
    }
    if let Some(id) = &common.run_id {
        config.run_id = id.clone();
    }
    if let Some(j) = common.jobs {
        config.jobs = j;
    }
    pipeline::validate(&config).map_err(|issues| fail(EXIT_VALIDATION, pipeline::PipelineError::Validation(issues)))
}

fn summary(report: &RunReport) {
    println!(
        "{}: {} article(s) ok, {} failed, {} files",
        report.run_dir.display(),
        report.articles_ok,
        report.articles_failed,
        report.manifest.files.len()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(level)))
        .with_writer(std::io::stderr)
        .init();

    let (common, forced) = match &cli.command {
        Command::Validate(c) | Command::Run(c) | Command::Sweep(c) => (c, None),
        Command::Record(c) => (c, Some(ProviderMode::Record)),
    };
    let inputs = match load(common, forced) {
        Ok(i) => i,
        Err(code) => return code,
    };
    if let Command::Validate(_) = cli.command {
        print!("{}", inputs.config.to_toml());
        return ExitCode::SUCCESS;
    }
    let provider = match Provider::from_config(inputs.config.provider.clone()) {
        Ok(p) => p,
        Err(e) => return fail(EXIT_VALIDATION, e),
    };
    let outcome = match cli.command {
        Command::Sweep(_) => pipeline::sweep(&inputs, &provider).map(|(report, _)| report),
        _ => pipeline::run(&inputs, &provider),
    };
    match outcome {
        Ok(report) => {
            summary(&report);
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.exit_code().max(EXIT_RUNTIME), e),
    }
}
