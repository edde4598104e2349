use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use depgate_core::pipeline::PipelineError;
use depgate_core::reports::ReportError;
use depgate_core::store::StoreError;
use depgate_core::sync::SyncError;
use serde::{Deserialize, Serialize};

/// Error body of every non-2xx response. `code` values are stable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn invalid_filter(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "invalid_filter", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "a valid bearer token is required")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ApiErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let message = e.to_string();
        match e {
            StoreError::NotFound(_) => Self::new(StatusCode::NOT_FOUND, "not_found", message),
            StoreError::IllegalTransition { .. } => Self::new(StatusCode::CONFLICT, "illegal_transition", message),
            StoreError::MissingJustification => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "missing_justification", message)
            }
            StoreError::MissingEndDate => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "missing_end_date", message),
            StoreError::InvalidEndDate { .. } => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_end_date", message)
            }
            StoreError::InvalidTimestamp(_) => {
                Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_timestamp", message)
            }
            StoreError::NotRejected(_) => Self::new(StatusCode::CONFLICT, "not_rejected", message),
            StoreError::DuplicateCategory(_) => Self::new(StatusCode::CONFLICT, "duplicate_category", message),
            StoreError::InvalidWaiver(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_waiver", message),
            StoreError::InvalidInput(_) => Self::new(StatusCode::BAD_REQUEST, "bad_request", message),
            StoreError::LeaseHeld { .. } => Self::new(StatusCode::CONFLICT, "sync_in_progress", message),
            StoreError::SchemaTooNew { .. } | StoreError::Corrupt(_) | StoreError::StorageFailure(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "storage_failure", message)
            }
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Store(s) => s.into(),
            PipelineError::Gate(g) => Self::internal(g.to_string()),
        }
    }
}

impl From<ReportError> for ApiError {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::UnknownCategory(_) => Self::new(StatusCode::NOT_FOUND, "unknown_category", e.to_string()),
            ReportError::InvalidArgument(_) => Self::bad_request(e.to_string()),
            ReportError::Store(s) => s.into(),
        }
    }
}

impl From<SyncError> for ApiError {
    fn from(e: SyncError) -> Self {
        match e {
            SyncError::Busy => Self::new(StatusCode::CONFLICT, "sync_in_progress", e.to_string()),
            SyncError::Store(s) => s.into(),
        }
    }
}
