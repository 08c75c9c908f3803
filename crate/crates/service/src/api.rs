//! The five `/v1` endpoints.

use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::oneshot;
use triage_core::corpus::Gender;
use triage_core::resources::Resources;
use triage_core::triage::{Demographics, Engine, Recommendation, Response, Session, Status};
use triage_core::{Error, Result};

use crate::config::Config;
use crate::pipeline::{self, Loaded};
use crate::search::{Candidate, SymptomIndex};
use crate::store::{new_session_id, Missing, SessionStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                error: kind.into(),
                message: message.into(),
            },
        }
    }

    fn missing(id: &str, m: Missing) -> Self {
        match m {
            Missing::Unknown => ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id}")),
            Missing::Expired => ApiError::new(StatusCode::GONE, "expired_session", format!("session {id} expired")),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Session(_) | Error::Lookup(_) | Error::Validation { .. } | Error::Config(_) | Error::Query(_) => {
                StatusCode::BAD_REQUEST
            }
            Error::Protocol(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.kind(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "body", e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "query", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> HttpResponse {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRequest {
    pub age: u32,
    pub gender: Gender,
    pub concepts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRequest {
    pub concept_id: String,
    pub response: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Question {
    pub concept_id: String,
    pub label: String,
}

/// Either the next question or, once the session is final, the
/// recommendation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReply {
    pub session_id: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub next_question: Option<Question>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub recommendation: Option<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub q: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchReply {
    pub query: String,
    pub candidates: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub version: String,
    pub kg_sha256: String,
    pub ontology_sha256: String,
    pub cases: usize,
    pub concepts: usize,
}

pub struct AppState {
    pub engine: Engine<'static>,
    pub store: SessionStore,
    pub index: SymptomIndex,
    pub health: Health,
}

impl AppState {
    /// The artifacts are leaked: they live as long as the process and every
    /// handler borrows them without reference counting.
    pub fn new(loaded: Loaded, resources: &Resources, cfg: &Config) -> Result<Self> {
        let loaded: &'static Loaded = Box::leak(Box::new(loaded));
        let engine = loaded.engine(cfg)?;
        let health = Health {
            status: "ok".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kg_sha256: loaded.kg_sha256.clone(),
            ontology_sha256: loaded.ontology_sha256.clone(),
            cases: loaded.kg.case_count(),
            concepts: loaded.ontology.len(),
        };
        Ok(AppState {
            engine,
            store: SessionStore::new(Duration::from_secs(cfg.service.session_ttl_secs)),
            index: SymptomIndex::new(&loaded.ontology, resources),
            health,
        })
    }

    pub fn from_config(cfg: &Config) -> Result<Self> {
        let loaded = pipeline::load(cfg)?;
        Self::new(loaded, &pipeline::resources(cfg)?, cfg)
    }

    fn reply(&self, s: &Session) -> Result<SessionReply> {
        let next_question = s.pending.as_ref().map(|c| Question {
            concept_id: c.clone(),
            label: self.engine.ontology().concept(c).map(|c| c.canonical.clone()).unwrap_or_default(),
        });
        let recommendation = if s.status.is_final() {
            Some(self.engine.recommend(s)?)
        } else {
            None
        };
        Ok(SessionReply {
            session_id: s.id.clone(),
            status: s.status,
            next_question,
            recommendation,
        })
    }
}

type Shared = State<Arc<AppState>>;

async fn start_session(
    State(app): Shared,
    body: std::result::Result<Json<StartRequest>, JsonRejection>,
) -> ApiResult<SessionReply> {
    let Json(req) = body?;
    let demographics = Demographics {
        age: req.age,
        gender: req.gender,
    };
    let session = app.engine.start(new_session_id(), demographics, &req.concepts)?;
    let reply = app.reply(&session)?;
    app.store.insert(session);
    Ok(Json(reply))
}

async fn answer(
    State(app): Shared,
    Path(id): Path<String>,
    body: std::result::Result<Json<AnswerRequest>, JsonRejection>,
) -> ApiResult<SessionReply> {
    let Json(req) = body?;
    let response = Response::from_str(&req.response)?;
    let slot = app.store.get(&id).map_err(|m| ApiError::missing(&id, m))?;
    let mut s = slot.lock().unwrap_or_else(|e| e.into_inner());
    app.engine.answer(&mut s, &req.concept_id, response)?;
    Ok(Json(app.reply(&s)?))
}

async fn recommendation(State(app): Shared, Path(id): Path<String>) -> ApiResult<Recommendation> {
    let slot = app.store.get(&id).map_err(|m| ApiError::missing(&id, m))?;
    let s = slot.lock().unwrap_or_else(|e| e.into_inner());
    Ok(Json(app.engine.recommend(&s)?))
}

async fn search(
    State(app): Shared,
    params: std::result::Result<Query<SearchParams>, QueryRejection>,
) -> ApiResult<SearchReply> {
    let Query(p) = params?;
    let candidates = app.index.search(&p.q)?;
    Ok(Json(SearchReply { query: p.q, candidates }))
}

async fn health(State(app): Shared) -> Json<Health> {
    Json(app.health.clone())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(start_session))
        .route("/v1/sessions/{id}/answer", post(answer))
        .route("/v1/sessions/{id}/recommendation", get(recommendation))
        .route("/v1/concepts/search", get(search))
        .route("/v1/health", get(health))
        .with_state(state)
}

const SWEEP_EVERY: Duration = Duration::from_secs(60);

/// Serves until `shutdown` resolves, then lets in-flight requests finish.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sweeper = {
        let state = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval(SWEEP_EVERY);
            loop {
                tick.tick().await;
                state.store.sweep();
            }
        })
    };
    let result = axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await;
    sweeper.abort();
    result
}

fn runtime(workers: usize) -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(workers.max(1))
        .enable_all()
        .build()
        .map_err(|e| Error::Config(format!("runtime: {e}")))
}

/// Blocks serving on `bind` until interrupted.
pub fn run(state: Arc<AppState>, bind: &str, workers: usize) -> Result<()> {
    let rt = runtime(workers)?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(bind)
            .await
            .map_err(|e| Error::Config(format!("cannot bind {bind}: {e}")))?;
        eprintln!("listening on {} with {workers} workers", listener.local_addr().map_err(|e| Error::io(bind, e))?);
        serve(listener, state, async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| Error::io(bind, e))
    })
}

/// A server on its own runtime and thread, stopped on drop.
pub struct BackgroundServer {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl BackgroundServer {
    pub fn start(state: Arc<AppState>, workers: usize) -> Result<Self> {
        let rt = runtime(workers)?;
        let listener = rt
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .map_err(|e| Error::Config(format!("cannot bind: {e}")))?;
        let addr = listener.local_addr().map_err(|e| Error::io("127.0.0.1:0", e))?;
        let (stop, stopped) = oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let _ = rt.block_on(serve(listener, state, async {
                let _ = stopped.await;
            }));
        });
        Ok(BackgroundServer {
            addr,
            stop: Some(stop),
            thread: Some(thread),
        })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }
}

impl Drop for BackgroundServer {
    fn drop(&mut self) {
        if let Some(s) = self.stop.take() {
            let _ = s.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
