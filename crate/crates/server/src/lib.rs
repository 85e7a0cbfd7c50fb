//! `/v1` HTTP facade over a loaded, immutable index.
//!
//! | route | |
//! |---|---|
//! | `POST /v1/query` | rank the corpus against a draft (JSON or YAML body) |
//! | `GET /v1/endpoints/{id}` | stored record and preview |
//! | `GET /v1/health` | index statistics |

pub mod api;

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use oasrank::ingest::{parse_tree, SpecFormat};
use oasrank::rank::{FusionConfig, RankError};
use oasrank::CorpusIndex;
use serde_json::json;
use thiserror::Error;

use api::{draft_from_value, execute_query, render_preview, EndpointResponse, HealthResponse, QueryRequest};

pub const DEFAULT_TOP_K_MAX: usize = 100;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unparsable draft: {0}")]
    UnparsableDraft(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("unsupported content type {0}")]
    UnsupportedMediaType(String),
    #[error("no index loaded")]
    IndexNotLoaded,
    #[error("unknown endpoint id {0}")]
    UnknownEndpoint(String),
    #[error(transparent)]
    Rank(#[from] RankError),
}

impl ServiceError {
    fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnparsableDraft(_) | ServiceError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::UnsupportedMediaType(_) => StatusCode::UNSUPPORTED_MEDIA_TYPE,
            ServiceError::IndexNotLoaded => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::UnknownEndpoint(_) => StatusCode::NOT_FOUND,
            ServiceError::Rank(RankError::EmptyIndex) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Rank(_) => StatusCode::BAD_REQUEST,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ServiceError::UnparsableDraft(_) => "unparsable_draft",
            ServiceError::InvalidRequest(_) => "invalid_request",
            ServiceError::UnsupportedMediaType(_) => "unsupported_media_type",
            ServiceError::IndexNotLoaded => "index_not_loaded",
            ServiceError::UnknownEndpoint(_) => "not_found",
            ServiceError::Rank(_) => "invalid_config",
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.code(), "message": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub index: Option<Arc<CorpusIndex>>,
    /// Requests asking for more results are clamped to this.
    pub top_k_max: usize,
    /// Starting point for each request's `config_override`.
    pub config: FusionConfig,
}

impl AppState {
    pub fn new(index: Option<Arc<CorpusIndex>>) -> Self {
        AppState {
            index,
            top_k_max: DEFAULT_TOP_K_MAX,
            config: FusionConfig::default(),
        }
    }

    fn index(&self) -> Result<&CorpusIndex, ServiceError> {
        self.index.as_deref().ok_or(ServiceError::IndexNotLoaded)
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/query", post(query))
        .route("/v1/endpoints/{id}", get(endpoint))
        .route("/v1/health", get(health))
        .with_state(Arc::new(state))
}

fn body_format(headers: &HeaderMap) -> Result<SpecFormat, ServiceError> {
    let Some(value) = headers.get(header::CONTENT_TYPE) else {
        return Ok(SpecFormat::Json);
    };
    let mime = value.to_str().unwrap_or_default();
    let essence = mime.split(';').next().unwrap_or_default().trim().to_ascii_lowercase();
    match essence.as_str() {
        "application/json" => Ok(SpecFormat::Json),
        "application/yaml" | "application/x-yaml" | "text/yaml" | "text/x-yaml" => Ok(SpecFormat::Yaml),
        _ => Err(ServiceError::UnsupportedMediaType(mime.to_owned())),
    }
}

async fn query(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    body: Bytes,
) -> Result<Response, ServiceError> {
    let index = state.index()?;
    let tree = parse_tree(&body, body_format(&headers)?)
        .map_err(|e| ServiceError::UnparsableDraft(e.to_string()))?;
    let request: QueryRequest =
        serde_json::from_value(tree).map_err(|e| ServiceError::InvalidRequest(e.to_string()))?;
    if request.top_k == 0 {
        return Err(ServiceError::InvalidRequest("top_k must be at least 1".into()));
    }
    let draft = draft_from_value(&request.draft).map_err(|e| ServiceError::UnparsableDraft(e.to_string()))?;
    let config = match &request.config_override {
        Some(o) => o.apply(&state.config)?,
        None => state.config.clone(),
    };
    let top_k = request.top_k.min(state.top_k_max);
    let response = execute_query(index, &draft, &config, top_k)?;
    log::debug!("query {} -> {} results", response.query, response.results.len());
    Ok(Json(response).into_response())
}

async fn endpoint(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> Result<Json<EndpointResponse>, ServiceError> {
    let index = state.index()?;
    let record = id
        .parse::<u32>()
        .ok()
        .and_then(|n| index.record(n))
        .ok_or(ServiceError::UnknownEndpoint(id))?;
    Ok(Json(EndpointResponse {
        record: record.clone(),
        preview: render_preview(record),
    }))
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    match &state.index {
        Some(index) => Json(HealthResponse {
            status: "ok".into(),
            stats: Some(index.stats()),
        })
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(HealthResponse {
                status: "no index loaded".into(),
                stats: None,
            }),
        )
            .into_response(),
    }
}
