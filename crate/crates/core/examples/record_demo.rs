//! Records fixtures for a configuration by running the round sweep against
//! the simulated backend behind the local mock endpoint.
//!
//! cargo run -p newsgap --example record_demo -- demo/config.toml

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use newsgap::config::ExperimentConfig;
use newsgap::llm::mock_server::MockServer;
use newsgap::llm::simulated::SimulatedBackend;
use newsgap::llm::{HttpBackend, Provider, ProviderMode};
use newsgap::pipeline;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("demo/config.toml"));
    let mut config = ExperimentConfig::load(&path)?;
    config.provider.mode = ProviderMode::Record;
    let scratch = std::env::temp_dir().join(format!("newsgap-record-{}", std::process::id()));
    config.output_dir = scratch.clone();

    let server = MockServer::start(Arc::new(SimulatedBackend::default()))?;
    config.provider.base_url = server.base_url();
    if let Some(dir) = &config.provider.fixture_dir {
        std::fs::create_dir_all(dir)?;
    }

    // Validation in record mode wants a key; the simulated endpoint accepts any.
    if std::env::var(&config.provider.api_key_env_name).is_err() {
        std::env::set_var(&config.provider.api_key_env_name, "simulated");
    }
    let inputs = pipeline::validate(&config).map_err(|i| i.join("; "))?;

    let backend = HttpBackend::new(
        &server.base_url(),
        std::env::var(&inputs.config.provider.api_key_env_name)?,
        Duration::from_secs(30),
    )?;
    let provider = Provider::with_backend(inputs.config.provider.clone(), Arc::new(backend))?;
    let (report, _) = pipeline::sweep(&inputs, &provider)?;
    println!(
        "recorded {} requests into {}",
        server.requests(),
        inputs
            .config
            .provider
            .fixture_dir
            .as_ref()
            .map_or(String::new(), |d| d.display().to_string())
    );
    std::fs::remove_dir_all(report.run_dir.parent().unwrap_or(&scratch)).ok();
    Ok(())
}
