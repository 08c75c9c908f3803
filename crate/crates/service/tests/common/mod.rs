//! Builds artifacts in a temporary directory through the pipeline stages.
#![allow(dead_code)]

use std::sync::Arc;

use tempfile::TempDir;
use triage_service::api::AppState;
use triage_service::config::Config;
use triage_service::pipeline;

pub struct Artifacts {
    pub dir: TempDir,
    pub cfg: Config,
}

pub fn artifacts(n: usize, seed: u64) -> Artifacts {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Config {
        data_dir: dir.path().to_path_buf(),
        seed,
        ..Config::default()
    };
    pipeline::generate(&cfg, n).unwrap();
    pipeline::ingest(&cfg).unwrap();
    pipeline::build_ontology(&cfg).unwrap();
    pipeline::build_kg(&cfg).unwrap();
    Artifacts { dir, cfg }
}

pub fn state(cfg: &Config) -> Arc<AppState> {
    Arc::new(AppState::from_config(cfg).unwrap())
}
