use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use triage_core::kg::{LearnConfig, WeightSource};
use triage_core::qgen::PredictorConfig;
use triage_core::relext::{PlantedConfig, TrainConfig};
use triage_core::textproc::TextConfig;
use triage_core::triage::TriageConfig;
use triage_core::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ServiceConfig {
    pub bind: String,
    pub workers: usize,
    pub session_ttl_secs: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            workers: 4,
            session_ttl_secs: 30 * 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub workers: Vec<usize>,
    pub concurrency: usize,
    /// Scripted sessions each client runs per worker setting.
    pub sessions_per_client: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            workers: vec![1, 2, 4],
            concurrency: 30,
            sessions_per_client: 5,
        }
    }
}

/// Everything the CLI and the service read. Unset keys take their defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub data_dir: PathBuf,
    pub seed: u64,
    /// Train, validation and test fractions shared by every stage.
    pub split: Vec<f64>,
    pub generator_profile: Option<PathBuf>,
    pub resources_dir: Option<PathBuf>,
    pub text: TextConfig,
    pub weights: WeightSource,
    pub learn: LearnConfig,
    pub relext: TrainConfig,
    pub planted: PlantedConfig,
    pub qgen: PredictorConfig,
    pub triage: TriageConfig,
    pub service: ServiceConfig,
    pub bench: BenchConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            data_dir: PathBuf::from("data"),
            seed: 7,
            split: vec![0.7, 0.1, 0.2],
            generator_profile: None,
            resources_dir: None,
            text: TextConfig::default(),
            weights: WeightSource::Idf,
            learn: LearnConfig::default(),
            relext: TrainConfig::default(),
            planted: PlantedConfig::default(),
            qgen: PredictorConfig::default(),
            triage: TriageConfig::default(),
            service: ServiceConfig::default(),
            bench: BenchConfig::default(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let c: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if c.split.len() != 3 {
            return Err(Error::Config("split needs train, validation and test fractions".into()));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn paths(&self) -> Paths {
        Paths::new(&self.data_dir)
    }
}

/// Artifact locations under the data directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Paths {
    pub corpus: PathBuf,
    pub ingested: PathBuf,
    pub annotations: PathBuf,
    pub ontology: PathBuf,
    pub kg: PathBuf,
    pub weights: PathBuf,
    pub ground_truth: PathBuf,
    pub relext_model: PathBuf,
    pub qgen_model: PathBuf,
    pub relext_metrics: PathBuf,
    pub qgen_metrics: PathBuf,
    pub triage_metrics: PathBuf,
    pub bench_report: PathBuf,
}

impl Paths {
    pub fn new(dir: &Path) -> Self {
        let p = |name: &str| dir.join(name);
        Paths {
            corpus: p("corpus.jsonl"),
            ingested: p("ingested.jsonl"),
            annotations: p("annotations.jsonl"),
            ontology: p("ontology.tsv"),
            kg: p("kg.snap"),
            weights: p("weights.json"),
            ground_truth: p("ground_truth.jsonl"),
            relext_model: p("relext.model"),
            qgen_model: p("qgen.model"),
            relext_metrics: p("relext_metrics.json"),
            qgen_metrics: p("qgen_metrics.json"),
            triage_metrics: p("triage_metrics.json"),
            bench_report: p("bench.json"),
        }
    }
}
