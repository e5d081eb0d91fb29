//! HTTP+JSON front of the session service.
//!
//! | method | path                                                    |
//! |--------|---------------------------------------------------------|
//! | POST   | `/sessions`                                             |
//! | GET    | `/sessions/{id}/next`                                   |
//! | GET    | `/sessions/{id}/items/{segment}`                        |
//! | POST   | `/sessions/{id}/items/{segment}/slots/{slot}/annotations` |
//! | POST   | `/sessions/{id}/items/{segment}/slots/{slot}/scopes`    |
//! | POST   | `/sessions/{id}/complete`                               |
//! | GET    | `/datasets/{id}/export`                                 |
//!
//! Errors are `application/problem+json` bodies with a `code` member.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Request, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::{ScopeUpdate, ServiceError, SessionService, SlotSpan};

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    /// When set, every request must carry `Authorization: Bearer <token>`.
    pub token: Option<String>,
}

#[derive(Clone)]
struct AppState {
    service: Arc<SessionService>,
    config: Arc<ServiceConfig>,
}

struct Problem {
    status: StatusCode,
    code: &'static str,
    detail: String,
}

impl Problem {
    fn new(status: StatusCode, code: &'static str, detail: impl Into<String>) -> Self {
        Self {
            status,
            code,
            detail: detail.into(),
        }
    }
}

impl From<ServiceError> for Problem {
    fn from(e: ServiceError) -> Self {
        use ServiceError::*;
        let status = match &e {
            UnknownDataset(_) | UnknownSession(_) | UnknownSegment(_) | UnknownSlot(_) => StatusCode::NOT_FOUND,
            UnknownAnnotator(_) | InvalidSpan { .. } | NoSuchSpan { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            NotReached(_) | Incomplete { .. } | AlreadyComplete => StatusCode::CONFLICT,
            Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Problem::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for Problem {
    fn from(e: JsonRejection) -> Self {
        Problem::new(e.status(), "bad_request", e.body_text())
    }
}

impl IntoResponse for Problem {
    fn into_response(self) -> Response {
        let body = json!({
            "type": format!("about:blank#{}", self.code),
            "title": self.status.canonical_reason().unwrap_or("Error"),
            "status": self.status.as_u16(),
            "detail": self.detail,
            "code": self.code,
        });
        let mut res = (self.status, Json(body)).into_response();
        res.headers_mut().insert(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/problem+json"),
        );
        res
    }
}

type ApiResult = Result<Response, Problem>;

fn ok<T: serde::Serialize>(status: StatusCode, v: T) -> ApiResult {
    Ok((status, Json(v)).into_response())
}

#[derive(Deserialize)]
struct CreateSession {
    annotator: String,
    dataset: String,
    seed: Option<u64>,
}

#[derive(Deserialize)]
struct SubmitBody {
    spans: Vec<SlotSpan>,
}

#[derive(Deserialize)]
struct ScopesBody {
    scopes: Vec<ScopeUpdate>,
}

async fn create_session(State(st): State<AppState>, body: Result<Json<CreateSession>, JsonRejection>) -> ApiResult {
    let Json(req) = body?;
    let seed = req.seed.unwrap_or_else(rand::random);
    ok(
        StatusCode::CREATED,
        st.service.create_session(&req.annotator, &req.dataset, seed)?,
    )
}

async fn next_item(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(StatusCode::OK, st.service.next_item(&id)?)
}

async fn item(State(st): State<AppState>, Path((id, segment)): Path<(String, u32)>) -> ApiResult {
    ok(StatusCode::OK, st.service.item(&id, segment)?)
}

async fn submit(
    State(st): State<AppState>,
    Path((id, segment, slot)): Path<(String, u32, String)>,
    body: Result<Json<SubmitBody>, JsonRejection>,
) -> ApiResult {
    let Json(req) = body?;
    ok(StatusCode::OK, st.service.submit_spans(&id, segment, &slot, req.spans)?)
}

async fn scopes(
    State(st): State<AppState>,
    Path((id, segment, slot)): Path<(String, u32, String)>,
    body: Result<Json<ScopesBody>, JsonRejection>,
) -> ApiResult {
    let Json(req) = body?;
    ok(
        StatusCode::OK,
        st.service.revise_scopes(&id, segment, &slot, req.scopes)?,
    )
}

async fn complete(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(StatusCode::OK, st.service.complete(&id)?)
}

async fn export(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(StatusCode::OK, st.service.export(&id)?)
}

async fn not_found() -> Problem {
    Problem::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

async fn require_token(State(st): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &st.config.token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return Problem::new(
                StatusCode::UNAUTHORIZED,
                "unauthorized",
                "missing or wrong bearer token",
            )
            .into_response();
        }
    }
    next.run(req).await
}

pub fn router(service: Arc<SessionService>, config: ServiceConfig) -> Router {
    let state = AppState {
        service,
        config: Arc::new(config),
    };
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/next", get(next_item))
        .route("/sessions/{id}/items/{segment}", get(item))
        .route("/sessions/{id}/items/{segment}/slots/{slot}/annotations", post(submit))
        .route("/sessions/{id}/items/{segment}/slots/{slot}/scopes", post(scopes))
        .route("/sessions/{id}/complete", post(complete))
        .route("/datasets/{id}/export", get(export))
        .fallback(not_found)
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}
