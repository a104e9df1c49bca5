use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use rexcl_core::Error as CoreError;

/// JSON error body: `{"code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    UnsupportedMedia(String),
    #[error("background task failed: {0}")]
    Join(#[from] tokio::task::JoinError),
}

impl ApiError {
    pub fn status_and_code(&self) -> (StatusCode, &'static str) {
        match self {
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            ApiError::UnsupportedMedia(_) => (StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type"),
            ApiError::Join(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            ApiError::Core(e) => match e {
                CoreError::InvalidArgument(_) => (StatusCode::BAD_REQUEST, "invalid_argument"),
                CoreError::Parse { .. } => (StatusCode::BAD_REQUEST, "parse_error"),
                CoreError::Decode(_) => (StatusCode::UNPROCESSABLE_ENTITY, "decode_error"),
                CoreError::Structure(_) => (StatusCode::UNPROCESSABLE_ENTITY, "structure_error"),
                CoreError::Numbering { .. } => (StatusCode::UNPROCESSABLE_ENTITY, "numbering_error"),
                CoreError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
                CoreError::State(_) => (StatusCode::CONFLICT, "conflict"),
                CoreError::Classification { .. } => (StatusCode::BAD_GATEWAY, "classification_error"),
                CoreError::UndefinedCorrelation(_) => (StatusCode::BAD_REQUEST, "undefined_correlation"),
                CoreError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io_error"),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.status_and_code();
        let body = ErrorBody {
            code: code.to_string(),
            message: self.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
