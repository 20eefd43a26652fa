//! The `/v1` HTTP API.
//!
//! Workers identify themselves with `Authorization: Bearer <worker id>`; the
//! `worker` query parameter and the `worker_id` body field are accepted when
//! no header is sent. Errors are JSON objects of the form
//! `{"error": {"code", "message", "details"}}`.

use std::collections::HashMap;
use std::future::Future;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde_json::json;
use tokio::net::TcpListener;

use crate::error::ServiceError;
use crate::payload::{CreateBatch, Submit};
use crate::service::Service;
use crate::state::{Command, Reply};

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        use ServiceError::*;
        match self {
            BadRequest(_) => StatusCode::BAD_REQUEST,
            EmptyManifest
            | UnknownConversation(_)
            | InvalidHit { .. }
            | InvalidGold { .. }
            | LabelSpanMismatch(_) => StatusCode::UNPROCESSABLE_ENTITY,
            DuplicateBatch(_) | DuplicateHit(_) | ConversationConflict(_) | LeaseExpired { .. } => {
                StatusCode::CONFLICT
            }
            UnknownBatch(_) | UnknownHit(_) | UnknownWorker(_) => StatusCode::NOT_FOUND,
            UnqualifiedWorker(_) | ExcludedWorker(_) => StatusCode::FORBIDDEN,
            NoWorkAvailable(_) => StatusCode::NO_CONTENT,
            Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
            Unavailable => StatusCode::SERVICE_UNAVAILABLE,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status == StatusCode::NO_CONTENT {
            return status.into_response();
        }
        let details = match &self {
            ServiceError::LabelSpanMismatch(diff) => json!(diff),
            ServiceError::LeaseExpired { worker_id, hit_id } => {
                json!({ "worker_id": worker_id, "hit_id": hit_id })
            }
            ServiceError::InvalidHit { hit_id, .. } | ServiceError::InvalidGold { hit_id, .. } => {
                json!({ "hit_id": hit_id })
            }
            _ => serde_json::Value::Null,
        };
        let body = json!({ "error": { "code": self.code(), "message": self.to_string(), "details": details } });
        (status, Json(body)).into_response()
    }
}

type ApiResult = Result<Response, ServiceError>;

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body)
        .map_err(|e| ServiceError::BadRequest(format!("invalid JSON body: {e}")))
}

fn bearer(headers: &HeaderMap) -> Result<Option<String>, ServiceError> {
    let Some(value) = headers.get(header::AUTHORIZATION) else {
        return Ok(None);
    };
    let Some(token) = value.to_str().ok().and_then(|v| v.strip_prefix("Bearer ")) else {
        return Err(ServiceError::BadRequest(
            "Authorization must be a bearer token".into(),
        ));
    };
    let token = token.trim();
    if token.is_empty() {
        return Err(ServiceError::BadRequest("empty bearer token".into()));
    }
    Ok(Some(token.to_string()))
}

fn identity(headers: &HeaderMap, fallback: Option<&String>) -> Result<String, ServiceError> {
    match (bearer(headers)?, fallback) {
        (Some(token), Some(other)) if token != *other => Err(ServiceError::BadRequest(format!(
            "bearer token {token} does not match worker {other}"
        ))),
        (Some(token), _) => Ok(token),
        (None, Some(other)) => Ok(other.clone()),
        (None, None) => Err(ServiceError::BadRequest(
            "no worker identity: send a bearer token".into(),
        )),
    }
}

async fn create_batch(State(svc): State<Service>, body: Bytes) -> ApiResult {
    let req: CreateBatch = parse(&body)?;
    match svc.execute(Command::CreateBatch(req)).await? {
        Reply::Batch(view) => Ok((StatusCode::CREATED, Json(view)).into_response()),
        other => unreachable!("create returned {other:?}"),
    }
}

async fn get_batch(State(svc): State<Service>, Path(id): Path<String>) -> ApiResult {
    let state = svc.state();
    let view = state
        .batch_view(svc.settings(), &id)
        .ok_or(ServiceError::UnknownBatch(id))?;
    Ok(Json(view).into_response())
}

async fn next_hit(
    State(svc): State<Service>,
    headers: HeaderMap,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let worker_id = identity(&headers, q.get("worker"))?;
    match svc.execute(Command::NextHit { worker_id }).await? {
        Reply::Hit(p) => Ok(Json(p).into_response()),
        other => unreachable!("next returned {other:?}"),
    }
}

async fn submit(
    State(svc): State<Service>,
    headers: HeaderMap,
    Path(hit_id): Path<String>,
    body: Bytes,
) -> ApiResult {
    let submit: Submit = parse(&body)?;
    let worker_id = identity(&headers, submit.worker_id.as_ref())?;
    match svc
        .execute(Command::Submit {
            worker_id,
            hit_id,
            submit,
        })
        .await?
    {
        Reply::Submitted(outcome) => Ok(Json(outcome).into_response()),
        other => unreachable!("submit returned {other:?}"),
    }
}

async fn get_worker(State(svc): State<Service>, Path(id): Path<String>) -> ApiResult {
    let view = svc
        .state()
        .worker_view(&id)
        .ok_or(ServiceError::UnknownWorker(id))?;
    Ok(Json(view).into_response())
}

async fn export_labels(State(svc): State<Service>) -> ApiResult {
    Ok(Json(svc.state().export_labels()).into_response())
}

async fn export_analytics(
    State(svc): State<Service>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult {
    let report = svc.state().analytics(svc.settings());
    match q.get("format").map(String::as_str) {
        None | Some("json") => Ok(Json(report).into_response()),
        Some("csv") => Ok(([(header::CONTENT_TYPE, "text/csv")], report.to_csv()).into_response()),
        Some(other) => Err(ServiceError::BadRequest(format!("unknown format {other}"))),
    }
}

async fn health(State(svc): State<Service>) -> Response {
    Json(json!({ "status": "ok", "seq": svc.state().seq })).into_response()
}

async fn not_found() -> Response {
    let body =
        json!({ "error": { "code": "not_found", "message": "no such endpoint", "details": null } });
    (StatusCode::NOT_FOUND, Json(body)).into_response()
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/batches", post(create_batch))
        .route("/v1/batches/{id}", get(get_batch))
        .route("/v1/hits/next", get(next_hit))
        .route("/v1/hits/{id}/submit", post(submit))
        .route("/v1/workers/{id}", get(get_worker))
        .route("/v1/exports/labels", get(export_labels))
        .route("/v1/exports/analytics", get(export_analytics))
        .fallback(not_found)
        .with_state(service)
}

/// Serves the API on `listener` until `shutdown` resolves, then drains the
/// writer.
pub async fn serve(
    listener: TcpListener,
    service: Service,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let result = axum::serve(listener, router(service.clone()))
        .with_graceful_shutdown(shutdown)
        .await;
    tokio::task::spawn_blocking(move || service.shutdown())
        .await
        .map_err(std::io::Error::other)?;
    result
}
