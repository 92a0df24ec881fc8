use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("instance {0} is not pending")]
    NotPending(usize),
    #[error("instance {0} is already labeled")]
    AlreadyLabeled(usize),
    #[error("unknown instance {0}")]
    UnknownInstance(usize),
    #[error("invalid request: {0}")]
    BadRequest(String),
    #[error(transparent)]
    Core(#[from] aad_core::AadError),
    #[error(transparent)]
    Harness(#[from] aad_harness::HarnessError),
    #[error("corrupt event log: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, ServiceError>;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownSession(_) | ServiceError::UnknownInstance(_) => StatusCode::NOT_FOUND,
            ServiceError::NotPending(_) | ServiceError::AlreadyLabeled(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) | ServiceError::Core(_) | ServiceError::Harness(_) => StatusCode::BAD_REQUEST,
            ServiceError::Corrupt(_) | ServiceError::Io(_) | ServiceError::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "error": self.to_string(),
        });
        (self.status(), Json(body)).into_response()
    }
}
