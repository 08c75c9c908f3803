//! Load test: concurrent scripted sessions against an in-process server
//! per worker count.

use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use triage_core::triage::{script, GroundTruthCase, Script};
use triage_core::{Error, Result};

use crate::api::{AnswerRequest, AppState, BackgroundServer, SessionReply, StartRequest};
use crate::config::BenchConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub workers: usize,
    pub concurrency: usize,
    pub sessions: usize,
    pub requests: usize,
    pub errors: usize,
    pub p50_secs: f64,
    pub p95_secs: f64,
    pub p99_secs: f64,
    pub mean_secs: f64,
    pub max_secs: f64,
    /// Completed requests per second of wall time.
    pub throughput: f64,
    pub wall_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub from_workers: usize,
    pub to_workers: usize,
    /// Throughput ratio over the ideal doubling.
    pub efficiency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRun {
    pub version: String,
    pub os: String,
    pub available_cores: usize,
    pub kg_sha256: String,
    pub cases: usize,
    pub scripts: usize,
    pub reports: Vec<BenchReport>,
    pub scaling: Vec<Scaling>,
}

impl BenchRun {
    pub fn summary(&self) -> String {
        let mut s = format!("cores {} scripts {}\n", self.available_cores, self.scripts);
        for r in &self.reports {
            s += &format!(
                "workers {} concurrency {} requests {} errors {} p50 {:.4}s p95 {:.4}s p99 {:.4}s mean {:.4}s throughput {:.1}/s\n",
                r.workers, r.concurrency, r.requests, r.errors, r.p50_secs, r.p95_secs, r.p99_secs, r.mean_secs, r.throughput
            );
        }
        for e in &self.scaling {
            s += &format!("efficiency {}->{} {:.3}\n", e.from_workers, e.to_workers, e.efficiency);
        }
        s
    }
}

/// Nearest-rank percentile of sorted values.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

pub fn scaling(reports: &[BenchReport]) -> Vec<Scaling> {
    let mut out = Vec::new();
    for a in reports {
        if let Some(b) = reports.iter().find(|b| b.workers == 2 * a.workers) {
            out.push(Scaling {
                from_workers: a.workers,
                to_workers: b.workers,
                efficiency: b.throughput / (2.0 * a.throughput),
            });
        }
    }
    out
}

#[derive(Default)]
struct ClientLog {
    latencies: Vec<f64>,
    errors: usize,
    sessions: usize,
}

async fn timed<T: for<'de> Deserialize<'de>>(
    log: &mut ClientLog,
    req: reqwest::RequestBuilder,
) -> Result<Option<T>> {
    let start = Instant::now();
    let resp = req.send().await.map_err(|e| Error::Config(format!("bench request failed: {e}")))?;
    let ok = resp.status().is_success();
    let body = resp.bytes().await.map_err(|e| Error::Config(format!("bench read failed: {e}")))?;
    log.latencies.push(start.elapsed().as_secs_f64());
    if !ok {
        log.errors += 1;
        return Ok(None);
    }
    serde_json::from_slice(&body).map(Some).map_err(|e| Error::Format(e.to_string()))
}

async fn run_client(client: reqwest::Client, base: String, scripts: Vec<Script>) -> Result<ClientLog> {
    let mut log = ClientLog::default();
    for sc in scripts {
        let start = StartRequest {
            age: sc.demographics.age,
            gender: sc.demographics.gender,
            concepts: sc.initial.clone(),
        };
        let mut reply: Option<SessionReply> = timed(&mut log, client.post(format!("{base}/v1/sessions")).json(&start)).await?;
        while let Some(r) = reply {
            let Some(q) = r.next_question else { break };
            let body = AnswerRequest {
                concept_id: q.concept_id.clone(),
                response: sc.response(&q.concept_id).to_string(),
            };
            let url = format!("{base}/v1/sessions/{}/answer", r.session_id);
            reply = timed(&mut log, client.post(url).json(&body)).await?;
        }
        log.sessions += 1;
    }
    Ok(log)
}

/// Scripts for every ground-truth case that can open a session.
pub fn scripts(state: &AppState, truth: &[GroundTruthCase]) -> Vec<Script> {
    truth.iter().filter_map(|c| script(&state.engine, c)).collect()
}

/// Runs `concurrency` clients, each replaying `per_client` scripts, against
/// `base`. Client `c` takes scripts `c * per_client ..` cyclically, so every
/// run sends the same mix.
pub fn load(base: &str, scripts: &[Script], concurrency: usize, per_client: usize) -> Result<(Vec<f64>, usize, usize, f64)> {
    if scripts.is_empty() || concurrency == 0 {
        return Err(Error::Config("bench needs scripts and at least one client".into()));
    }
    let rt = tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| Error::Config(format!("runtime: {e}")))?;
    let client = reqwest::Client::builder()
        .timeout(Duration::from_secs(120))
        .build()
        .map_err(|e| Error::Config(format!("http client: {e}")))?;
    rt.block_on(async {
        let start = Instant::now();
        let mut tasks = Vec::new();
        for c in 0..concurrency {
            let mine: Vec<Script> = (0..per_client).map(|j| scripts[(c * per_client + j) % scripts.len()].clone()).collect();
            tasks.push(tokio::spawn(run_client(client.clone(), base.to_string(), mine)));
        }
        let mut latencies = Vec::new();
        let (mut errors, mut sessions) = (0, 0);
        for t in tasks {
            let log = t.await.map_err(|e| Error::Config(format!("bench client panicked: {e}")))??;
            latencies.extend(log.latencies);
            errors += log.errors;
            sessions += log.sessions;
        }
        Ok((latencies, errors, sessions, start.elapsed().as_secs_f64()))
    })
}

pub fn report(workers: usize, concurrency: usize, mut latencies: Vec<f64>, errors: usize, sessions: usize, wall: f64) -> BenchReport {
    latencies.sort_by(f64::total_cmp);
    let n = latencies.len();
    BenchReport {
        workers,
        concurrency,
        sessions,
        requests: n,
        errors,
        p50_secs: percentile(&latencies, 50.0),
        p95_secs: percentile(&latencies, 95.0),
        p99_secs: percentile(&latencies, 99.0),
        mean_secs: if n == 0 { 0.0 } else { latencies.iter().sum::<f64>() / n as f64 },
        max_secs: latencies.last().copied().unwrap_or(0.0),
        throughput: if wall > 0.0 { n as f64 / wall } else { 0.0 },
        wall_secs: wall,
    }
}

/// One in-process server per worker count, each loaded with the same mix.
pub fn bench(state: Arc<AppState>, truth: &[GroundTruthCase], cfg: &BenchConfig) -> Result<BenchRun> {
    let scripts = scripts(&state, truth);
    let mut reports = Vec::new();
    for &w in &cfg.workers {
        let server = BackgroundServer::start(state.clone(), w)?;
        let (lat, errors, sessions, wall) = load(&server.url(""), &scripts, cfg.concurrency, cfg.sessions_per_client)?;
        drop(server);
        reports.push(report(w, cfg.concurrency, lat, errors, sessions, wall));
    }
    Ok(BenchRun {
        version: env!("CARGO_PKG_VERSION").into(),
        os: std::env::consts::OS.into(),
        available_cores: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        kg_sha256: state.health.kg_sha256.clone(),
        cases: state.health.cases,
        scripts: scripts.len(),
        scaling: scaling(&reports),
        reports,
    })
}
