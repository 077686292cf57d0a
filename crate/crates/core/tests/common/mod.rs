#![allow(dead_code)]

use std::path::{Path, PathBuf};

use newsgap::config::ExperimentConfig;
use newsgap::llm::Provider;
use newsgap::pipeline::{self, Inputs};

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

/// The bundled demo configuration with artifacts redirected to `out`.
pub fn demo_inputs(out: &Path) -> Inputs {
    let mut config = ExperimentConfig::load(&demo_dir().join("config.toml")).expect("demo config loads");
    config.output_dir = out.to_path_buf();
    pipeline::validate(&config).expect("demo inputs validate")
}

pub fn replay_provider(inputs: &Inputs) -> Provider {
    Provider::from_config(inputs.config.provider.clone()).expect("replay provider")
}

use std::sync::Arc;

use newsgap::corpus::{load_corpus, Corpus};
use newsgap::llm::simulated::SimulatedBackend;
use newsgap::llm::{Backend, ProviderConfig, ProviderMode};
use newsgap::memory::AgentProfile;

/// Provider that answers every request from `backend` with no fixtures.
pub fn live_provider(backend: Arc<dyn Backend>) -> Provider {
    let config = ProviderConfig {
        mode: ProviderMode::Live,
        ..ProviderConfig::default()
    };
    Provider::with_backend(config, backend).expect("live provider")
}

pub fn simulated() -> Provider {
    live_provider(Arc::new(SimulatedBackend::default()))
}

pub fn experts() -> Vec<AgentProfile> {
    ["Finance", "Law", "Agriculture", "Technology"]
        .iter()
        .map(|d| AgentProfile::domain_expert(d))
        .collect()
}

/// The demo corpus with segments labelled by `provider`.
pub fn demo_corpus(provider: &Provider) -> Corpus {
    let raw = load_corpus(&demo_dir().join("corpus.jsonl")).expect("demo corpus");
    pipeline::segment_corpus(&raw, provider).expect("segmentation")
}
