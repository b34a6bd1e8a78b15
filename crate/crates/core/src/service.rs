//! JSON-over-HTTP surface for the engine.

use std::path::{Component, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::ats::{AtsReport, ProfileScore};
use crate::config::RunOverrides;
use crate::engine::{Engine, EngineError};
use crate::experiment::{compare, ExperimentJd};
use crate::generation::RenderFormat;
use crate::ingest::{DocFormat, SourceDocument};
use crate::pipeline::{Condition, PipelineError, RunConfig, RunInputs, RunState};
use crate::runstore::RunRecord;
use crate::vault::{Collection, VaultError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            message: message.into(),
            field: None,
        }
    }

    fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError {
            field: Some(field.into()),
            ..ApiError::new(StatusCode::BAD_REQUEST, "VALIDATION", message)
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        use StatusCode as S;
        let msg = e.to_string();
        match e {
            EngineError::InvalidInput { field, message } => ApiError::validation(field, message),
            EngineError::UnknownRun(_) => ApiError::new(S::NOT_FOUND, "UNKNOWN_RUN", msg),
            EngineError::UnknownItem { .. } => ApiError::new(S::NOT_FOUND, "UNKNOWN_ITEM", msg),
            EngineError::NotApprovable { .. } => {
                ApiError::new(S::BAD_REQUEST, "NOT_APPROVABLE", msg)
            }
            EngineError::RunNotDone(_) => ApiError::new(S::CONFLICT, "RUN_NOT_DONE", msg),
            EngineError::Ingest(_) => ApiError::validation("raw", msg),
            EngineError::Vault(v) => match v {
                VaultError::UnknownChunk(_) => ApiError::new(S::NOT_FOUND, "UNKNOWN_CHUNK", msg),
                VaultError::UnknownRun(_) => ApiError::new(S::NOT_FOUND, "UNKNOWN_RUN", msg),
                VaultError::Locked => ApiError::new(S::CONFLICT, "VAULT_LOCKED", msg),
                VaultError::CorruptStore { .. }
                | VaultError::VersionMismatch { .. }
                | VaultError::Io(_) => ApiError::new(S::INTERNAL_SERVER_ERROR, "VAULT_STORE", msg),
                _ => ApiError::new(S::BAD_REQUEST, "VAULT_INPUT", msg),
            },
            EngineError::Gateway(_) => ApiError::new(S::BAD_GATEWAY, "GATEWAY", msg),
            EngineError::Pipeline(PipelineError::InvalidConfig { field, message }) => {
                ApiError::validation(format!("config.{field}"), message)
            }
            EngineError::Pipeline(_) => {
                ApiError::new(S::INTERNAL_SERVER_ERROR, "PIPELINE_FAILURE", msg)
            }
            EngineError::Store(_) => ApiError::new(S::INTERNAL_SERVER_ERROR, "STORE", msg),
            EngineError::DimensionMismatch { .. }
            | EngineError::Io { .. }
            | EngineError::Json { .. } => ApiError::new(S::INTERNAL_SERVER_ERROR, "INTERNAL", msg),
        }
    }
}

/// Parses a JSON body, reporting the failing field path.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            "body".to_string()
        } else {
            path
        };
        ApiError::validation(field, e.inner().to_string())
    })
}

#[derive(Clone)]
pub struct AppState {
    pub engine: Arc<Engine>,
    /// Server-wide run defaults; request overrides apply on top.
    pub defaults: RunConfig,
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, EngineError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?
        .map_err(ApiError::from)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum ResumeSource {
    Inline {
        text: String,
        #[serde(default = "markdown")]
        format: DocFormat,
    },
    /// Path relative to the data directory.
    Ref { path: String },
}

fn markdown() -> DocFormat {
    DocFormat::Markdown
}

impl ResumeSource {
    fn inputs(&self, engine: &Engine, jd_text: String) -> Result<RunInputs, EngineError> {
        let (text, format) = match self {
            ResumeSource::Inline { text, format } => (text.clone(), *format),
            ResumeSource::Ref { path } => {
                let rel = PathBuf::from(path);
                if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
                    return Err(EngineError::InvalidInput {
                        field: "base_resume.path".into(),
                        message: "must be a relative path inside the data directory".into(),
                    });
                }
                let full = engine.data_dir().join(&rel);
                let text =
                    std::fs::read_to_string(&full).map_err(|e| EngineError::InvalidInput {
                        field: "base_resume.path".into(),
                        message: e.to_string(),
                    })?;
                let format = if path.ends_with(".md") {
                    DocFormat::Markdown
                } else {
                    DocFormat::Plaintext
                };
                (text, format)
            }
        };
        Ok(RunInputs {
            jd_text,
            resume_text: text,
            resume_format: format,
            base_doc_id: "target".into(),
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunRequest {
    pub jd_text: String,
    pub base_resume: ResumeSource,
    #[serde(default)]
    pub config: RunOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub condition: Condition,
    pub overall_fit: f64,
    pub best_profile: f64,
    pub best_profile_name: String,
    pub verdict: String,
    pub profile_scores: Vec<ProfileScore>,
    pub pass_count: u32,
    pub retrieved: usize,
    pub kept: usize,
    pub findings: usize,
    pub highlights: usize,
    pub flags: Vec<String>,
    pub formats: Vec<RenderFormat>,
}

impl RunSummary {
    pub fn of(s: &RunState) -> RunSummary {
        let ats = s.ats.as_ref().expect("finished run");
        RunSummary {
            run_id: s.run_id.clone(),
            condition: s.condition,
            overall_fit: ats.overall_fit,
            best_profile: ats.best_profile,
            best_profile_name: ats.best_profile_name.clone(),
            verdict: ats.verdict.as_str().to_string(),
            profile_scores: ats.profile_scores.clone(),
            pass_count: s.pass_count,
            retrieved: s.retrieved.len(),
            kept: s.snippets.len(),
            findings: s.findings.len(),
            highlights: s.draft.as_ref().map_or(0, |d| d.tailored_highlights.len()),
            flags: s.flags.clone(),
            formats: s.rendered.keys().copied().collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunDetail {
    pub record: RunRecord,
    pub result: Option<RunState>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ApproveRequest {
    item_ids: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareRequest {
    jds: Vec<ExperimentJd>,
    base_resume: ResumeSource,
    #[serde(default)]
    config: RunOverrides,
}

#[derive(Debug, Deserialize)]
struct ChunkQuery {
    collection: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RenderQuery {
    format: Option<String>,
}

async fn health() -> impl IntoResponse {
    Json(serde_json::json!({"status": "ok"}))
}

async fn index_document(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let doc: SourceDocument = parse_body(&body)?;
    let report = blocking(move || app.engine.index_document(&doc)).await?;
    Ok((StatusCode::CREATED, Json(report)))
}

async fn list_chunks(
    State(app): State<AppState>,
    Query(q): Query<ChunkQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let collection = match q.collection.as_deref() {
        None | Some("") => None,
        Some(name) => Some(Collection::parse(name).ok_or_else(|| {
            ApiError::validation("collection", format!("unknown collection {name:?}"))
        })?),
    };
    Ok(Json(app.engine.list_chunks(collection)))
}

async fn delete_chunk(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    blocking(move || app.engine.delete_chunk(&id)).await?;
    Ok(StatusCode::NO_CONTENT)
}

async fn create_run(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: RunRequest = parse_body(&body)?;
    let config = req.config.apply(&app.defaults);
    let state = blocking(move || {
        let inputs = req.base_resume.inputs(&app.engine, req.jd_text)?;
        app.engine.run(&inputs, &config)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(RunSummary::of(&state))))
}

async fn list_runs(State(app): State<AppState>) -> Result<Json<Vec<RunRecord>>, ApiError> {
    Ok(Json(blocking(move || app.engine.list_runs()).await?))
}

async fn get_run(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<RunDetail>, ApiError> {
    let detail = blocking(move || {
        let record = app.engine.run_record(&id)?;
        let result = match app.engine.run_result(&id) {
            Ok(r) => Some(r),
            Err(EngineError::RunNotDone(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(RunDetail { record, result })
    })
    .await?;
    Ok(Json(detail))
}

async fn get_trace(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(blocking(move || app.engine.replay_trace(&id)).await?))
}

async fn get_ats(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<AtsReport>, ApiError> {
    Ok(Json(blocking(move || app.engine.ats(&id)).await?))
}

async fn get_render(
    State(app): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<RenderQuery>,
) -> Result<Response, ApiError> {
    let format: RenderFormat = q
        .format
        .as_deref()
        .unwrap_or("txt")
        .parse()
        .map_err(|m: String| ApiError::validation("format", m))?;
    let text = blocking(move || app.engine.render(&id, format)).await?;
    let mime = match format {
        RenderFormat::Txt => "text/plain; charset=utf-8",
        RenderFormat::Html => "text/html; charset=utf-8",
        RenderFormat::Markdown => "text/markdown; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, mime)], text).into_response())
}

async fn approve(
    State(app): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: ApproveRequest = parse_body(&body)?;
    let approved = blocking(move || app.engine.approve(&id, &req.item_ids)).await?;
    Ok((StatusCode::CREATED, Json(approved)))
}

async fn experiment(
    State(app): State<AppState>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: CompareRequest = parse_body(&body)?;
    let config = req.config.apply(&app.defaults);
    let report = blocking(move || {
        let inputs = req.base_resume.inputs(&app.engine, String::new())?;
        compare(&app.engine, &req.jds, &inputs, &config)
    })
    .await?;
    Ok(Json(report))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such route")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/vault/documents", post(index_document))
        .route("/vault/chunks", get(list_chunks))
        .route("/vault/chunks/{*id}", delete(delete_chunk))
        .route("/runs", post(create_run).get(list_runs))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/trace", get(get_trace))
        .route("/runs/{id}/ats", get(get_ats))
        .route("/runs/{id}/render", get(get_render))
        .route("/runs/{id}/approve", post(approve))
        .route("/experiments/compare", post(experiment))
        .fallback(fallback)
        .with_state(state)
}

/// Binds and serves until ctrl-c.
pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
