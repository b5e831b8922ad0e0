//! JSON API over the session store.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use imtkit::imt::{Correction, ImtError, ImtSession, SessionStatus};
use imtkit::{detokenize, tokenize};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::services::ServeDir;

use crate::registry::{Engine, EngineInfo, EngineRegistry};
use crate::store::{SessionStore, StoreError, StoredSession};

#[derive(Clone)]
pub struct AppState {
    pub registry: Arc<EngineRegistry>,
    pub store: Arc<SessionStore>,
}

impl AppState {
    pub fn new(registry: EngineRegistry, store: SessionStore) -> Self {
        AppState {
            registry: Arc::new(registry),
            store: Arc::new(store),
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::UnknownSession(_) => StatusCode::NOT_FOUND,
            StoreError::Session(s) => match s {
                ImtError::PositionOutOfRange { .. } | ImtError::InsidePrefix { .. } | ImtError::InvalidWord(_) => {
                    StatusCode::UNPROCESSABLE_ENTITY
                }
                ImtError::AlreadyAccepted => StatusCode::CONFLICT,
                _ => StatusCode::INTERNAL_SERVER_ERROR,
            },
            StoreError::Io { .. } | StoreError::Journal { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status == StatusCode::INTERNAL_SERVER_ERROR {
            log::error!("{e}");
        }
        ApiError::new(status, e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        let status = match e.status() {
            StatusCode::BAD_REQUEST | StatusCode::UNPROCESSABLE_ENTITY => StatusCode::UNPROCESSABLE_ENTITY,
            other => other,
        };
        ApiError::new(status, e.body_text())
    }
}

type ApiResult<T> = Result<T, ApiError>;

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    pub engine: String,
    pub source_text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub hypothesis: String,
    pub prefix_len: usize,
    pub hypothesis_tokens: Vec<String>,
}

/// A word correction, or with `end` set a cut of everything from
/// `position` on.
#[derive(Debug, Deserialize)]
pub struct CorrectionRequest {
    pub position: usize,
    #[serde(default)]
    pub word: Option<String>,
    #[serde(default)]
    pub end: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorrectionResponse {
    pub hypothesis: String,
    pub prefix_len: usize,
    pub word_strokes: usize,
    pub mouse_actions: usize,
    pub hypothesis_tokens: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct MetricsView {
    pub word_strokes: usize,
    pub mouse_actions: usize,
    pub iterations: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct AcceptResponse {
    pub final_text: String,
    pub metrics: MetricsView,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IterationView {
    pub position: usize,
    /// `None` for a truncation.
    pub word: Option<String>,
    pub hypothesis: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub engine: String,
    pub source_text: String,
    pub hypothesis: String,
    pub hypothesis_tokens: Vec<String>,
    pub prefix_len: usize,
    pub word_strokes: usize,
    pub mouse_actions: usize,
    pub iterations: usize,
    pub status: SessionStatus,
    pub log: Vec<IterationView>,
}

impl SessionView {
    fn new(stored: &StoredSession) -> Self {
        let s: &ImtSession = &stored.session;
        SessionView {
            session_id: s.id().to_string(),
            engine: stored.engine.clone(),
            source_text: detokenize(s.source()),
            hypothesis: detokenize(s.hypothesis()),
            hypothesis_tokens: s.hypothesis().tokens().to_vec(),
            prefix_len: s.prefix().len(),
            word_strokes: s.word_strokes(),
            mouse_actions: s.mouse_actions(),
            iterations: s.log().len(),
            status: s.status(),
            log: s
                .log()
                .iter()
                .map(|it| IterationView {
                    position: it.position,
                    word: match &it.correction {
                        Correction::Word(w) => Some(w.clone()),
                        Correction::End => None,
                    },
                    hypothesis: detokenize(&it.hypothesis),
                })
                .collect(),
        }
    }
}

fn parse_id(raw: &str) -> ApiResult<u64> {
    raw.parse()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {raw:?}")))
}

fn engine_for(state: &AppState, name: &str) -> ApiResult<Engine> {
    state
        .registry
        .get(name)
        .cloned()
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown engine {name:?}")))
}

/// Runs blocking engine work off the async executor.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

async fn create_session(
    State(state): State<AppState>,
    body: Result<Json<CreateRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<CreateResponse>)> {
    let Json(req) = body?;
    let engine = engine_for(&state, &req.engine)?;
    let source = tokenize(&req.source_text);
    if source.is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "source_text is empty"));
    }
    let stored = blocking(move || Ok(state.store.create(&engine.name, &*engine.generator, source)?)).await?;
    let s = &stored.session;
    log::info!("session {} started on {}", s.id(), stored.engine);
    Ok((
        StatusCode::CREATED,
        Json(CreateResponse {
            session_id: s.id().to_string(),
            hypothesis: detokenize(s.hypothesis()),
            prefix_len: s.prefix().len(),
            hypothesis_tokens: s.hypothesis().tokens().to_vec(),
        }),
    ))
}

async fn correct_session(
    State(state): State<AppState>,
    Path(raw_id): Path<String>,
    body: Result<Json<CorrectionRequest>, JsonRejection>,
) -> ApiResult<Json<CorrectionResponse>> {
    let id = parse_id(&raw_id)?;
    let Json(req) = body?;
    let engine_name = state.store.engine_of(id)?;
    let stored = if req.end {
        state.store.truncate(id, req.position)?
    } else {
        let word = req
            .word
            .ok_or_else(|| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "missing field `word`"))?;
        let engine = state.registry.get(&engine_name).cloned().ok_or_else(|| {
            ApiError::new(
                StatusCode::SERVICE_UNAVAILABLE,
                format!("engine {engine_name:?} of session {id} is not loaded"),
            )
        })?;
        blocking(move || Ok(state.store.correct(id, &*engine.generator, req.position, &word)?)).await?
    };
    let s = &stored.session;
    Ok(Json(CorrectionResponse {
        hypothesis: detokenize(s.hypothesis()),
        prefix_len: s.prefix().len(),
        word_strokes: s.word_strokes(),
        mouse_actions: s.mouse_actions(),
        hypothesis_tokens: s.hypothesis().tokens().to_vec(),
    }))
}

async fn accept_session(State(state): State<AppState>, Path(raw_id): Path<String>) -> ApiResult<Json<AcceptResponse>> {
    let id = parse_id(&raw_id)?;
    let (m, _) = state.store.accept(id)?;
    Ok(Json(AcceptResponse {
        final_text: detokenize(&m.final_hypothesis),
        metrics: MetricsView {
            word_strokes: m.word_strokes,
            mouse_actions: m.mouse_actions,
            iterations: m.iterations,
        },
    }))
}

async fn get_session(State(state): State<AppState>, Path(raw_id): Path<String>) -> ApiResult<Json<SessionView>> {
    let id = parse_id(&raw_id)?;
    Ok(Json(SessionView::new(&state.store.get(id)?)))
}

async fn list_engines(State(state): State<AppState>) -> Json<Vec<EngineInfo>> {
    Json(state.registry.infos())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not found")
}

/// The API under `/api`, with static files from `static_dir` at `/`.
pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/corrections", post(correct_session))
        .route("/sessions/{id}/accept", post(accept_session))
        .route("/engines", get(list_engines))
        .fallback(not_found)
        .with_state(state);
    let app = Router::new().nest("/api", api);
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(not_found),
    }
}

/// Binds `addr` and serves until Ctrl-C.
pub async fn serve(addr: SocketAddr, state: AppState, static_dir: Option<PathBuf>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, static_dir))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
