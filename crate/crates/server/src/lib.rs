//! JSON API over [`CaseService`].
//!
//! Errors are `{"code": ..., "message": ...}` with a 4xx status; the code
//! is the same string the library error reports.

use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;

use petlp_core::pipeline::CaseInputs;
use petlp_core::questionnaire::{
    AnswerRequest, CaseService, CreateCaseRequest, DpiaUpdateRequest, QuestionnaireError, WhatIfRequest,
};

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code: code.into(),
            message: message.into(),
        }
    }
}

impl From<QuestionnaireError> for ApiError {
    fn from(e: QuestionnaireError) -> Self {
        let status = match e.code() {
            "case_not_found" | "not_found" => StatusCode::NOT_FOUND,
            "case_exists" | "already_exists" => StatusCode::CONFLICT,
            "corrupt_ledger" | "io_error" => StatusCode::INTERNAL_SERVER_ERROR,
            "out_of_order_stage" => StatusCode::CONFLICT,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "invalid_request", e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

type Body<T> = Result<Json<T>, JsonRejection>;

pub type AppState = Arc<CaseService>;

pub fn router(service: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { "ok" }))
        .route("/trees", get(trees))
        .route("/assess", post(assess))
        .route("/cases", post(create_case))
        .route("/cases/{id}", get(get_case))
        .route("/cases/{id}/answer", post(answer))
        .route("/cases/{id}/dpia", get(dpia).post(record_dpia))
        .route("/cases/{id}/whatif", post(whatif))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") })
        .with_state(service)
}

async fn trees(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.trees())
}

async fn assess(State(s): State<AppState>, body: Body<CaseInputs>) -> ApiResult<serde_json::Value> {
    let Json(inputs) = body?;
    inputs.validate().map_err(QuestionnaireError::from)?;
    let a = inputs.assess(s.packs(), s.transfer_lists(), &BTreeSet::new());
    Ok(Json(serde_json::to_value(a).expect("assessment serialises")))
}

async fn create_case(
    State(s): State<AppState>,
    body: Body<CreateCaseRequest>,
) -> Result<(StatusCode, Json<serde_json::Value>), ApiError> {
    let Json(req) = body?;
    let view = s.create_case(req)?;
    Ok((StatusCode::CREATED, Json(serde_json::to_value(view).expect("case serialises"))))
}

async fn get_case(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<serde_json::Value> {
    Ok(Json(serde_json::to_value(s.get_case(&id)?).expect("case serialises")))
}

async fn answer(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Body<AnswerRequest>,
) -> ApiResult<serde_json::Value> {
    let Json(req) = body?;
    Ok(Json(serde_json::to_value(s.answer(&id, &req)?).expect("answer serialises")))
}

async fn whatif(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Body<WhatIfRequest>,
) -> ApiResult<serde_json::Value> {
    let Json(req) = body?;
    Ok(Json(serde_json::to_value(s.whatif(&id, &req)?).expect("whatif serialises")))
}

async fn dpia(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<serde_json::Value> {
    Ok(Json(serde_json::to_value(s.dpia(&id)?).expect("dpia serialises")))
}

async fn record_dpia(
    State(s): State<AppState>,
    Path(id): Path<String>,
    body: Body<DpiaUpdateRequest>,
) -> ApiResult<serde_json::Value> {
    let Json(req) = body?;
    Ok(Json(serde_json::to_value(s.record_dpia(&id, req)?).expect("dpia serialises")))
}

/// Bind and serve until ctrl-c.
pub async fn serve(service: CaseService, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(Arc::new(service)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
