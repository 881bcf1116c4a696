use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use cabinet_core::io::{parse_election, parse_upload, tally_results, FormatError, Location, SCHEMA_VERSION};
use cabinet_core::model::{BallotDraft, ElectionDraft};
use cabinet_core::ModelError;
use serde::Serialize;
use serde_json::json;

use crate::store::UpsertError;
use crate::AppState;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
    location: Option<Location>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            location: None,
        }
    }

    fn not_found() -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", "no such session")
    }

    fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<FormatError> for ApiError {
    fn from(err: FormatError) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: err.code(),
            message: err.to_string(),
            location: Some(err.location()),
        }
    }
}

impl From<ModelError> for ApiError {
    fn from(err: ModelError) -> Self {
        ApiError {
            status: StatusCode::BAD_REQUEST,
            code: err.code(),
            location: err.path().map(|p| Location::Path { path: p.to_owned() }),
            message: err.to_string(),
        }
    }
}

impl From<BytesRejection> for ApiError {
    fn from(rejection: BytesRejection) -> Self {
        let status = rejection.status();
        let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
            "PayloadTooLarge"
        } else {
            "UnreadableBody"
        };
        ApiError::new(status, code, rejection.body_text())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    schema_version: u32,
    error: ErrorDetail<'a>,
}

#[derive(Serialize)]
struct ErrorDetail<'a> {
    code: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    location: Option<&'a Location>,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            schema_version: SCHEMA_VERSION,
            error: ErrorDetail {
                code: self.code,
                message: &self.message,
                location: self.location.as_ref(),
            },
        };
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn results_response(bytes: Arc<Vec<u8>>) -> Response {
    (
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/json")],
        bytes.as_ref().clone(),
    )
        .into_response()
}

pub async fn health() -> Json<serde_json::Value> {
    Json(json!({ "schema_version": SCHEMA_VERSION, "status": "ok" }))
}

pub async fn create_election(
    State(state): State<AppState>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let election = parse_election(&body?)?;
    let session_id = state.store.create(election);
    log::info!("created session {session_id}");
    Ok((
        StatusCode::CREATED,
        Json(json!({ "schema_version": SCHEMA_VERSION, "session_id": session_id })),
    )
        .into_response())
}

#[derive(Serialize)]
struct SessionView {
    schema_version: u32,
    session_id: String,
    election: ElectionDraft,
    ballots: Vec<BallotDraft>,
    n: usize,
    voter_cap: usize,
}

pub async fn get_election(
    State(state): State<AppState>,
    Path(session_id): Path<String>,
) -> ApiResult<Response> {
    let handle = state.store.get(&session_id).ok_or_else(ApiError::not_found)?;
    let session = handle.lock().unwrap();
    Ok(Json(SessionView {
        schema_version: SCHEMA_VERSION,
        session_id,
        election: session.election().to_draft(),
        ballots: session.ballots().to_vec(),
        n: session.voter_count(),
        voter_cap: state.config.voter_cap,
    })
    .into_response())
}

pub async fn submit_ballot(
    State(state): State<AppState>,
    Path(session_id): Path<String>,
    body: Result<Bytes, BytesRejection>,
) -> ApiResult<Response> {
    let handle = state.store.get(&session_id).ok_or_else(ApiError::not_found)?;
    let body = body?;
    let draft: BallotDraft = serde_json::from_slice(&body).map_err(FormatError::from)?;
    let n = handle
        .lock()
        .unwrap()
        .upsert(draft, state.config.voter_cap)
        .map_err(|e| match e {
            UpsertError::Invalid(err) => ApiError::from(err),
            UpsertError::VoterLimitReached { cap } => ApiError::new(
                StatusCode::CONFLICT,
                "VoterLimitReached",
                format!("this demo session accepts at most {cap} voters"),
            ),
        })?;
    Ok(Json(json!({ "schema_version": SCHEMA_VERSION, "n": n })).into_response())
}

pub async fn tally_session(
    State(state): State<AppState>,
    Path(session_id): Path<String>,
) -> ApiResult<Response> {
    let handle = state.store.get(&session_id).ok_or_else(ApiError::not_found)?;
    let snapshot = {
        let session = handle.lock().unwrap();
        if let Some(bytes) = session.cached_results() {
            return Ok(results_response(bytes));
        }
        if session.voter_count() == 0 {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "NoBallots",
                "submit at least one ballot before tallying",
            ));
        }
        session.snapshot()
    };
    let revision = snapshot.revision;
    let bytes = tokio::task::spawn_blocking(move || -> ApiResult<Vec<u8>> {
        let profile = snapshot.profile()?;
        tally_results(&snapshot.election, &profile).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    let bytes = Arc::new(bytes);
    handle.lock().unwrap().store_results(revision, Arc::clone(&bytes));
    Ok(results_response(bytes))
}

pub async fn tally_file(body: Result<Bytes, BytesRejection>) -> ApiResult<Response> {
    let body = body?;
    let bytes = tokio::task::spawn_blocking(move || -> ApiResult<Vec<u8>> {
        let (election, profile) = parse_upload(&body)?;
        tally_results(&election, &profile).map_err(|e| ApiError::internal(e.to_string()))
    })
    .await
    .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(results_response(Arc::new(bytes)))
}
