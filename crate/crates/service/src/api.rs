//! HTTP routes under `/api/v1`.

use crate::datasets::DatasetError;
use crate::service::{Service, ServiceError};
use crate::store::{JobState, StoreError};
use autotab_core::dataset::DataError;
use autotab_core::neural::RunConfig;
use autotab_core::visual::{LOG_FILE, PLOTS_DIR};
use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use std::sync::Arc;
use tower_http::services::ServeDir;

/// Multipart framing allowance on top of the file size limit.
const MULTIPART_SLACK: u64 = 64 * 1024;

#[derive(Debug, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    status: StatusCode,
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, error: &str, message: impl Into<String>) -> Self {
        Self { status, error: error.into(), message: message.into(), field: None }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", format!("no {what} with id {id}"))
    }

    fn internal(e: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Store(StoreError::UnknownJob(id)) => Self::not_found("job", &id),
            ServiceError::Dataset(DatasetError::Unknown(id)) => Self::not_found("dataset", &id),
            other => Self::internal(other),
        }
    }
}

type ApiResult<T> = Result<T, ApiError>;
type Shared = State<Arc<Service>>;

pub fn router(service: Arc<Service>) -> Router {
    let limit = usize::try_from(service.config.max_upload_bytes.saturating_add(MULTIPART_SLACK)).unwrap_or(usize::MAX);
    let api = Router::new()
        .route("/datasets", post(upload).layer(DefaultBodyLimit::max(limit)).get(list_datasets))
        .route("/datasets/{id}", get(get_dataset))
        .route("/datasets/{id}/schema", get(get_schema))
        .route("/jobs", post(submit_job).get(list_jobs))
        .route("/jobs/{id}", get(get_job))
        .route("/jobs/{id}/report", get(get_report))
        .route("/jobs/{id}/log", get(get_log))
        .route("/jobs/{id}/plots/{file}", get(get_plot))
        .route("/catalog", get(catalog))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such endpoint") });
    let ui = service.config.ui_dir.clone();
    let app = Router::new().nest("/api/v1", api).with_state(service);
    match ui {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

async fn upload(State(service): Shared, mut multipart: Multipart) -> ApiResult<Response> {
    let limit = service.config.max_upload_bytes;
    let too_large = || ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "PayloadTooLarge", format!("uploads are limited to {limit} bytes"));
    let multipart_error = |e: axum::extract::multipart::MultipartError| {
        if e.status() == StatusCode::PAYLOAD_TOO_LARGE {
            too_large()
        } else {
            ApiError::new(StatusCode::BAD_REQUEST, "MalformedUpload", e.body_text())
        }
    };
    while let Some(mut field) = multipart.next_field().await.map_err(multipart_error)? {
        if field.name() != Some("file") {
            continue;
        }
        let filename = field.file_name().unwrap_or("upload.csv").to_string();
        let mut bytes = Vec::new();
        while let Some(chunk) = field.chunk().await.map_err(multipart_error)? {
            if (bytes.len() + chunk.len()) as u64 > limit {
                return Err(too_large());
            }
            bytes.extend_from_slice(&chunk);
        }
        let record = tokio::task::spawn_blocking(move || service.datasets.create(&filename, &bytes))
            .await
            .map_err(ApiError::internal)?
            .map_err(|e| match e {
                DatasetError::Data(d) => data_error(d),
                other => ApiError::internal(other),
            })?;
        return Ok((StatusCode::CREATED, Json(record)).into_response());
    }
    Err(ApiError::new(StatusCode::BAD_REQUEST, "MissingFile", "expected a multipart field named \"file\""))
}

fn data_error(e: DataError) -> ApiError {
    ApiError::new(StatusCode::BAD_REQUEST, e.code(), e.to_string())
}

async fn list_datasets(State(service): Shared) -> Response {
    Json(service.datasets.list()).into_response()
}

async fn get_dataset(State(service): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let record = service.datasets.get(&id).ok_or_else(|| ApiError::not_found("dataset", &id))?;
    Ok(Json(record).into_response())
}

async fn get_schema(State(service): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let record = service.datasets.get(&id).ok_or_else(|| ApiError::not_found("dataset", &id))?;
    Ok(Json(record.schema).into_response())
}

async fn submit_job(State(service): Shared, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "InvalidConfig", "body is not UTF-8"))?;
    let invalid = |e: autotab_core::neural::ConfigError| ApiError {
        status: StatusCode::BAD_REQUEST,
        error: "InvalidConfig".into(),
        message: e.message,
        field: Some(e.field),
    };
    let config = RunConfig::from_json(text).map_err(invalid)?;
    let record = service.datasets.get(&config.dataset_id).ok_or_else(|| ApiError::not_found("dataset", &config.dataset_id))?;
    config.validate_against(&record.schema).map_err(invalid)?;
    let job = service.submit(config)?;
    Ok((StatusCode::ACCEPTED, Json(job)).into_response())
}

async fn list_jobs(State(service): Shared) -> Response {
    Json(service.jobs.list()).into_response()
}

async fn get_job(State(service): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let job = service.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    Ok(Json(job).into_response())
}

async fn get_report(State(service): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    let job = service.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    let Some(rel) = job.report_path.filter(|_| job.state == JobState::Succeeded) else {
        return Err(ApiError::new(StatusCode::CONFLICT, "NotReady", format!("job is {}; reports exist only for succeeded jobs", job.state)));
    };
    let bytes = tokio::fs::read(service.config.data_root.join(rel)).await.map_err(ApiError::internal)?;
    Ok(([(header::CONTENT_TYPE, "application/json")], bytes).into_response())
}

async fn get_log(State(service): Shared, Path(id): Path<String>) -> ApiResult<Response> {
    if service.jobs.get(&id).is_none() {
        return Err(ApiError::not_found("job", &id));
    }
    let bytes = match tokio::fs::read(service.job_dir(&id).join(LOG_FILE)).await {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(ApiError::internal(e)),
    };
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], bytes).into_response())
}

async fn get_plot(State(service): Shared, Path((id, file)): Path<(String, String)>) -> ApiResult<Response> {
    let job = service.jobs.get(&id).ok_or_else(|| ApiError::not_found("job", &id))?;
    let valid = file.ends_with(".svg") && file.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if job.state != JobState::Succeeded || !valid {
        return Err(ApiError::not_found("plot", &file));
    }
    let bytes = tokio::fs::read(service.job_dir(&id).join(PLOTS_DIR).join(&file)).await.map_err(|_| ApiError::not_found("plot", &file))?;
    Ok(([(header::CONTENT_TYPE, "image/svg+xml")], bytes).into_response())
}

async fn catalog() -> Response {
    Json(autotab_core::models::catalog()).into_response()
}
