//! HTTP service over an [`Engine`].

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Engine, InterfaceError, Page, QueueFilter, ReviewDecision, ValidateRequest};
use crate::model::{StrategyKind, Variation};
use crate::recovery::FunnelReport;

impl IntoResponse for InterfaceError {
    fn into_response(self) -> Response {
        let (status, kind, retriable) = match &self {
            InterfaceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", false),
            InterfaceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request", false),
            InterfaceError::Conflict(_) => (StatusCode::CONFLICT, "conflict", false),
            InterfaceError::Upstream(_) => (StatusCode::BAD_GATEWAY, "upstream_error", true),
            InterfaceError::Unprocessable(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unprocessable", false),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal", false),
        };
        (status, Json(json!({ "error": kind, "message": self.to_string(), "retriable": retriable }))).into_response()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobStatus {
    pub job_id: String,
    pub state: JobState,
    pub done: usize,
    pub total: usize,
    pub funnel: Option<FunnelReport>,
    pub recovered: usize,
    pub enqueued: usize,
    pub skipped: usize,
    pub error: Option<String>,
}

struct AppState {
    engine: Arc<Engine>,
    token: Option<String>,
    jobs: Mutex<HashMap<String, JobStatus>>,
    next_job: AtomicU64,
}

type Shared = Arc<AppState>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, InterfaceError> + Send + 'static,
) -> Result<T, InterfaceError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| InterfaceError::Other(e.to_string()))?
}

async fn auth(State(state): State<Shared>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.token {
        let ok = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .is_some_and(|t| t == token);
        if !ok && req.uri().path() != "/health" {
            let body = json!({ "error": "unauthorized", "message": "missing or wrong bearer token", "retriable": false });
            return (StatusCode::UNAUTHORIZED, Json(body)).into_response();
        }
    }
    next.run(req).await
}

async fn health(State(state): State<Shared>) -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "store_version": state.engine.store().version() }))
}

async fn validate(State(state): State<Shared>, body: Bytes) -> Result<Response, InterfaceError> {
    let req: ValidateRequest =
        serde_json::from_slice(&body).map_err(|e| InterfaceError::BadRequest(format!("malformed body: {e}")))?;
    let engine = state.engine.clone();
    let resp = blocking(move || engine.handle_validate(&req)).await?;
    Ok(Json(resp).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RecoverRequest {
    strategy: Option<StrategyKind>,
    k: Option<usize>,
    explanation_mode: Option<bool>,
}

async fn start_recovery(State(state): State<Shared>, body: Bytes) -> Result<Response, InterfaceError> {
    let req: RecoverRequest = if body.is_empty() {
        RecoverRequest::default()
    } else {
        serde_json::from_slice(&body).map_err(|e| InterfaceError::BadRequest(format!("malformed body: {e}")))?
    };
    let job_id = format!("job-{}", state.next_job.fetch_add(1, Ordering::SeqCst) + 1);
    let status = JobStatus {
        job_id: job_id.clone(),
        state: JobState::Running,
        done: 0,
        total: 0,
        funnel: None,
        recovered: 0,
        enqueued: 0,
        skipped: 0,
        error: None,
    };
    state.jobs.lock().unwrap().insert(job_id.clone(), status);
    let st = state.clone();
    let id = job_id.clone();
    tokio::task::spawn_blocking(move || {
        let strategy = st.engine.strategy_for(req.strategy, req.k, req.explanation_mode);
        let progress = |done: usize, total: usize| {
            if let Some(j) = st.jobs.lock().unwrap().get_mut(&id) {
                j.done = done;
                j.total = total;
            }
        };
        let result = st.engine.run_recovery(strategy, progress);
        let mut jobs = st.jobs.lock().unwrap();
        let job = jobs.get_mut(&id).expect("job registered");
        match result {
            Ok((outcome, added)) => {
                job.state = JobState::Done;
                job.total = outcome.funnel.after_stage3 as usize;
                job.done = job.total;
                job.recovered = outcome.recovered.len();
                job.skipped = outcome.skipped.len();
                job.enqueued = added;
                job.funnel = Some(outcome.funnel);
            }
            Err(e) => {
                job.state = JobState::Failed;
                job.error = Some(e.to_string());
            }
        }
    });
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))).into_response())
}

async fn recovery_status(State(state): State<Shared>, Path(job_id): Path<String>) -> Result<Response, InterfaceError> {
    let jobs = state.jobs.lock().unwrap();
    let job = jobs.get(&job_id).ok_or_else(|| InterfaceError::NotFound(format!("recovery job `{job_id}`")))?;
    Ok(Json(job.clone()).into_response())
}

async fn review_queue(
    State(state): State<Shared>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, InterfaceError> {
    let bad = |m: String| InterfaceError::BadRequest(m);
    let mut filter = QueueFilter::default();
    let mut page = Page::default();
    for (k, v) in &params {
        match k.as_str() {
            "status" => filter.status = Some(v.parse().map_err(bad)?),
            "variation" => filter.variation = Some(v.parse::<Variation>().map_err(|e| bad(e.to_string()))?),
            "min_vote_share" => {
                filter.min_vote_share = Some(v.parse().map_err(|_| bad(format!("min_vote_share `{v}` is not a number")))?)
            }
            "offset" => page.offset = v.parse().map_err(|_| bad(format!("offset `{v}` is not a count")))?,
            "limit" => page.limit = v.parse().map_err(|_| bad(format!("limit `{v}` is not a count")))?,
            other => return Err(bad(format!("unknown filter `{other}`"))),
        }
    }
    Ok(Json(state.engine.store().list_review_queue(&filter, page)?).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionRequest {
    decision: ReviewDecision,
    reviewer: String,
}

async fn review_decision(
    State(state): State<Shared>,
    Path(item_id): Path<String>,
    body: Bytes,
) -> Result<Response, InterfaceError> {
    let req: DecisionRequest =
        serde_json::from_slice(&body).map_err(|e| InterfaceError::BadRequest(format!("malformed body: {e}")))?;
    let engine = state.engine.clone();
    let receipt = blocking(move || engine.record_review_decision(&item_id, req.decision, &req.reviewer)).await?;
    Ok(Json(receipt).into_response())
}

async fn metrics_latest(State(state): State<Shared>) -> Result<Response, InterfaceError> {
    let engine = state.engine.clone();
    match blocking(move || engine.latest_metrics()).await? {
        Some(r) => Ok(Json(r).into_response()),
        None => Err(InterfaceError::NotFound("no metrics report yet".into())),
    }
}

/// All endpoints. `token`, when set, is required as a bearer token on
/// everything except `/health`.
pub fn router(engine: Arc<Engine>, token: Option<String>) -> Router {
    let state = Arc::new(AppState { engine, token, jobs: Mutex::new(HashMap::new()), next_job: AtomicU64::new(0) });
    Router::new()
        .route("/health", get(health))
        .route("/validate", post(validate))
        .route("/recover", post(start_recovery))
        .route("/recover/{job_id}", get(recovery_status))
        .route("/review/queue", get(review_queue))
        .route("/review/{item_id}/decision", post(review_decision))
        .route("/metrics/latest", get(metrics_latest))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

/// A server running on its own thread and runtime.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    /// Binds `bind` (port 0 picks a free port) and serves until dropped.
    pub fn start(engine: Arc<Engine>, bind: &str, token: Option<String>) -> std::io::Result<Self> {
        let std_listener = std::net::TcpListener::bind(bind)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let (tx, rx) = tokio::sync::oneshot::channel::<()>();
        let thread = std::thread::spawn(move || {
            let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener)?;
                axum::serve(listener, router(engine, token))
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        });
        Ok(Self { addr, shutdown: Some(tx), thread: Some(thread) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Blocks until the server stops on its own.
    pub fn wait(mut self) -> std::io::Result<()> {
        self.shutdown.take();
        match self.thread.take() {
            Some(t) => t.join().map_err(|_| std::io::Error::other("server thread panicked"))?,
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}
