//! Command-line front end for the pipeline stages, the server and the bench.

use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde::Serialize;
use triage_core::triage::load_ground_truth;
use triage_core::{Error, Result};

use crate::api::{self, AppState};
use crate::bench;
use crate::config::Config;
use crate::pipeline;

#[derive(Debug, Parser)]
#[command(name = "triage", version, about = "Medical triage pipeline and service")]
pub struct Cli {
    /// TOML configuration file; unset keys take their defaults.
    #[arg(long, global = true, env = "TRIAGE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Directory holding every artifact.
    #[arg(long, global = true, env = "TRIAGE_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    #[arg(long, global = true, env = "TRIAGE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads for serve.
    #[arg(long, global = true, env = "TRIAGE_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long, global = true, env = "TRIAGE_BIND")]
    pub bind: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus.
    Generate {
        #[arg(long, default_value_t = 10_000)]
        n: usize,
    },
    /// Run the text pipeline over the corpus.
    Ingest,
    BuildOntology,
    /// Build the graph from the training split and write the test split as ground truth.
    BuildKg,
    TrainRelext,
    EvalRelext,
    TrainQgen,
    EvalQgen,
    EvalTriage {
        /// Ground-truth suite; defaults to the one written by build-kg.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    Serve,
    Bench {
        /// Comma-separated worker counts.
        #[arg(long, value_delimiter = ',')]
        workers: Option<Vec<usize>>,
        #[arg(long)]
        concurrency: Option<usize>,
        #[arg(long)]
        sessions_per_client: Option<usize>,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    Stats,
}

impl Cli {
    pub fn config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(d) = &self.data_dir {
            cfg.data_dir = d.clone();
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(w) = self.workers {
            cfg.service.workers = w;
        }
        if let Some(b) = &self.bind {
            cfg.service.bind = b.clone();
        }
        Ok(cfg)
    }
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string(value).map_err(|e| Error::Format(e.to_string()))
}

/// Runs one command and returns what it prints on success.
pub fn execute(cli: &Cli) -> Result<String> {
    let mut cfg = cli.config()?;
    Ok(match &cli.command {
        Command::Generate { n } => format!("generated {} records", pipeline::generate(&cfg, *n)?),
        Command::Ingest => json(&pipeline::ingest(&cfg)?)?,
        Command::BuildOntology => json(&pipeline::build_ontology(&cfg)?)?,
        Command::BuildKg => json(&pipeline::build_kg(&cfg)?)?,
        Command::TrainRelext => json(&pipeline::train_relext(&cfg)?)?,
        Command::EvalRelext => json(&pipeline::eval_relext(&cfg)?)?,
        Command::TrainQgen => json(&pipeline::train_qgen(&cfg)?)?,
        Command::EvalQgen => pipeline::eval_qgen(&cfg)?.summary(),
        Command::EvalTriage { truth } => pipeline::eval_triage(&cfg, truth.as_deref())?.summary(),
        Command::Serve => {
            let state = Arc::new(AppState::from_config(&cfg)?);
            api::run(state, &cfg.service.bind, cfg.service.workers)?;
            "stopped".into()
        }
        Command::Bench {
            workers,
            concurrency,
            sessions_per_client,
            truth,
        } => {
            if let Some(w) = workers {
                cfg.bench.workers = w.clone();
            }
            if let Some(c) = concurrency {
                cfg.bench.concurrency = *c;
            }
            if let Some(s) = sessions_per_client {
                cfg.bench.sessions_per_client = *s;
            }
            let truth = load_ground_truth(truth.as_ref().unwrap_or(&cfg.paths().ground_truth))?;
            let state = Arc::new(AppState::from_config(&cfg)?);
            let run = bench::bench(state, &truth, &cfg.bench)?;
            let path = cfg.paths().bench_report;
            std::fs::write(&path, json(&run)? + "\n").map_err(|e| Error::io(&path, e))?;
            run.summary()
        }
        Command::Stats => pipeline::stats(&cfg)?,
    })
}

/// Single-line error report for scripts: `error kind=<kind> message="..."`.
pub fn error_line(e: &Error) -> String {
    format!("error kind={} message={:?}", e.kind(), e.to_string())
}
