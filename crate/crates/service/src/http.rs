//! JSON-over-HTTP front of [`GradingService`].

use std::collections::HashMap;
use std::sync::Arc;

use acgrade_core::sheet::ScanPage;
use acgrade_core::{BookletId, TaskId};
use axum::body::Bytes;
use axum::extract::{FromRequestParts, Path, Query, State};
use axum::http::request::Parts;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Duration;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{Actor, ServiceConfig};
use crate::error::ServiceError;
use crate::export::load_registry;
use crate::lifecycle::ExamState;
use crate::service::{CommentRequest, GradingService, ServiceOptions, SubmitRequest};

#[derive(Clone)]
pub struct AppState {
    service: Arc<GradingService>,
    tokens: Arc<HashMap<String, Actor>>,
}

impl AppState {
    pub fn new(service: Arc<GradingService>, config: &ServiceConfig) -> Self {
        let tokens = config
            .tokens
            .iter()
            .map(|(grader, entry)| {
                let actor = Actor { grader_id: grader.as_str().into(), lead: entry.lead };
                (entry.token.clone(), actor)
            })
            .collect();
        AppState { service, tokens: Arc::new(tokens) }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/exams", post(upload_exam))
        .route("/api/exams/current", get(current_exam))
        .route("/api/exams/{id}/state", post(transition))
        .route("/api/scans/batch", post(ingest))
        .route("/api/grading/next", get(claim_next))
        .route("/api/assignments", post(submit))
        .route("/api/assignments/{booklet}/{task}", get(assignment))
        .route("/api/comments", post(comment))
        .route("/api/analytics/tasks/{id}/histogram", get(histogram))
        .route("/api/analytics/cohort", get(cohort))
        .route("/api/export/grades.csv", get(export_grades))
        .route("/api/export/feedback/{booklet}", get(export_feedback))
        .with_state(state)
}

/// Opens the configured data directory and serves until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServiceError> {
    let registry_path = config.registry.clone().or_else(|| {
        let default = config.data_dir.join("registry.csv");
        default.exists().then_some(default)
    });
    let registry = registry_path.as_deref().map(load_registry).transpose()?;
    let lease = Duration::seconds(i64::try_from(config.lease_seconds).unwrap_or(i64::MAX / 1000));
    let options = ServiceOptions { lease, registry, ..ServiceOptions::default() };
    let service = Arc::new(GradingService::open(&config.data_dir, options)?);
    let app = router(AppState::new(service, &config));
    let listener = tokio::net::TcpListener::bind(&config.listen).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

/// [`serve`] on a fresh multi-threaded runtime.
pub fn serve_blocking(config: ServiceConfig) -> Result<(), ServiceError> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(config))
}

/// Caller resolved from the `Authorization: Bearer` header.
pub struct Authed(pub Actor);

impl FromRequestParts<AppState> for Authed {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim);
        match token.and_then(|t| state.tokens.get(t)) {
            Some(actor) => Ok(Authed(actor.clone())),
            None => Err(ApiError(ServiceError::Forbidden("missing or unknown bearer token".into()))),
        }
    }
}

pub struct ApiError(pub ServiceError);

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

pub fn status_of(error: &ServiceError) -> StatusCode {
    use ServiceError::*;
    match error {
        NoWork(_) => StatusCode::NO_CONTENT,
        WrongState { .. } | BadTransition { .. } | VersionConflict { .. } | ClaimHeldByOther(_) | NotClaimed => {
            StatusCode::CONFLICT
        }
        NoExam | NotFound(_) => StatusCode::NOT_FOUND,
        Forbidden(_) => StatusCode::FORBIDDEN,
        InvalidExam(_) | Assignment(_) | Invalid(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Config(_) | CorruptLog { .. } | Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status == StatusCode::NO_CONTENT {
            return status.into_response();
        }
        let mut body = json!({ "error": self.0.to_string() });
        if let ServiceError::InvalidExam(e) = &self.0 {
            body["diagnostics"] = json!(e
                .diagnostics
                .iter()
                .map(|d| json!({ "pointer": d.pointer, "message": d.message }))
                .collect::<Vec<_>>());
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::Invalid(format!("request body: {e}")))
}

/// Runs a service call off the async executor; calls may fsync the log.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, ServiceError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError(ServiceError::Io(std::io::Error::other(e))))?.map_err(ApiError)
}

async fn upload_exam(State(s): State<AppState>, Authed(actor): Authed, body: Bytes) -> ApiResult<Response> {
    let text = String::from_utf8(body.to_vec()).map_err(|_| ServiceError::Invalid("body is not UTF-8".into()))?;
    let service = s.service.clone();
    blocking(move || service.upload_exam(&actor, &text)).await?;
    let status = s.service.status()?;
    Ok((StatusCode::CREATED, Json(status)).into_response())
}

async fn current_exam(State(s): State<AppState>, Authed(_): Authed) -> ApiResult<Response> {
    Ok(Json(s.service.status()?).into_response())
}

#[derive(Deserialize)]
struct StateBody {
    state: ExamState,
}

async fn transition(
    State(s): State<AppState>,
    Authed(actor): Authed,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let request: StateBody = parse(&body)?;
    match s.service.exam() {
        Some(exam) if exam.exam_id == id => {}
        _ => return Err(ServiceError::NotFound(format!("exam {id}")).into()),
    }
    let service = s.service.clone();
    let state = blocking(move || service.transition(&actor, request.state)).await?;
    Ok(Json(json!({ "exam_id": id, "state": state })).into_response())
}

#[derive(Deserialize)]
struct BatchBody {
    pages: Vec<ScanPage>,
}

async fn ingest(State(s): State<AppState>, Authed(actor): Authed, body: Bytes) -> ApiResult<Response> {
    let request: BatchBody = parse(&body)?;
    let service = s.service.clone();
    let result = blocking(move || service.ingest_batch(&actor, request.pages)).await?;
    Ok(Json(result).into_response())
}

#[derive(Deserialize)]
struct NextQuery {
    task: String,
}

async fn claim_next(State(s): State<AppState>, Authed(actor): Authed, Query(q): Query<NextQuery>) -> ApiResult<Response> {
    let claim = s.service.claim_next(&actor, &TaskId::new(q.task))?;
    Ok(Json(claim).into_response())
}

async fn submit(State(s): State<AppState>, Authed(actor): Authed, body: Bytes) -> ApiResult<Response> {
    let request: SubmitRequest = parse(&body)?;
    let service = s.service.clone();
    let assignment = blocking(move || service.submit_assignment(&actor, request)).await?;
    Ok(Json(assignment).into_response())
}

async fn assignment(
    State(s): State<AppState>,
    Authed(_): Authed,
    Path((booklet, task)): Path<(String, String)>,
) -> ApiResult<Response> {
    Ok(Json(s.service.assignment(&BookletId::new(booklet), &TaskId::new(task))?).into_response())
}

async fn comment(State(s): State<AppState>, Authed(actor): Authed, body: Bytes) -> ApiResult<Response> {
    let request: CommentRequest = parse(&body)?;
    let service = s.service.clone();
    let comment = blocking(move || service.add_comment(&actor, request)).await?;
    Ok((StatusCode::CREATED, Json(comment)).into_response())
}

#[derive(Serialize)]
struct HistogramBody {
    task_id: TaskId,
    counts: std::collections::BTreeMap<acgrade_core::AcId, usize>,
}

async fn histogram(State(s): State<AppState>, Authed(_): Authed, Path(id): Path<String>) -> ApiResult<Response> {
    let task_id = TaskId::new(id);
    let counts = s.service.histogram(&task_id)?;
    Ok(Json(HistogramBody { task_id, counts }).into_response())
}

async fn cohort(State(s): State<AppState>, Authed(_): Authed) -> ApiResult<Response> {
    Ok(Json(s.service.cohort()?).into_response())
}

async fn export_grades(State(s): State<AppState>, Authed(_): Authed) -> ApiResult<Response> {
    let csv = s.service.export_grades()?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn export_feedback(State(s): State<AppState>, Authed(_): Authed, Path(booklet): Path<String>) -> ApiResult<Response> {
    let text = s.service.export_feedback(&BookletId::new(booklet))?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}
