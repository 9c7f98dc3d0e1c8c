use axum::extract::multipart::MultipartError;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use earmark_core::gallery::GalleryError;
use earmark_core::index::{IndexError, RankError};
use earmark_ingest::FeedError;
use earmark_registry::{PhotoError, RegistryError};
use serde_json::{json, Value};

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Photo(#[from] PhotoError),
    #[error(transparent)]
    Feed(#[from] FeedError),
    #[error(transparent)]
    Gallery(#[from] GalleryError),
    #[error("{0}")]
    BadRequest(String),
    #[error("{0} not found")]
    NotFound(String),
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("{0}")]
    Forbidden(String),
    #[error("no event feed is configured")]
    FeedNotConfigured,
    #[error("{0}")]
    Internal(String),
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

impl From<MultipartError> for ApiError {
    fn from(e: MultipartError) -> Self {
        ApiError::BadRequest(e.body_text())
    }
}

fn registry_status(e: &RegistryError) -> (StatusCode, &'static str, Value) {
    use RegistryError::*;
    match e {
        NotFound { kind, id } => (StatusCode::NOT_FOUND, "not_found", json!({ "kind": kind, "id": id })),
        VersionConflict {
            entity,
            expected,
            actual,
        } => (
            StatusCode::CONFLICT,
            "version_conflict",
            json!({ "entity": entity, "expected": expected, "actual": actual }),
        ),
        DuplicateEvent(_) => (StatusCode::CONFLICT, "duplicate_event", Value::Null),
        DuplicatePhoto(_) => (StatusCode::CONFLICT, "duplicate_photo", Value::Null),
        DuplicateSighting(_) => (StatusCode::CONFLICT, "duplicate_sighting", Value::Null),
        AlreadyAssigned { individual, .. } => {
            (StatusCode::CONFLICT, "already_assigned", json!({ "individual": individual }))
        }
        SameGroup { .. } => (StatusCode::CONFLICT, "same_group", Value::Null),
        SightingResolved(_) => (StatusCode::CONFLICT, "sighting_resolved", Value::Null),
        Validation(_) => (StatusCode::UNPROCESSABLE_ENTITY, "validation", Value::Null),
        UnknownIndividual(_) => (StatusCode::UNPROCESSABLE_ENTITY, "unknown_individual", Value::Null),
        OutOfBounds { width, height, .. } => (
            StatusCode::UNPROCESSABLE_ENTITY,
            "out_of_bounds",
            json!({ "width": width, "height": height }),
        ),
        NoBoxes(_) => (StatusCode::UNPROCESSABLE_ENTITY, "no_boxes", Value::Null),
        NotCoded(_) => (StatusCode::UNPROCESSABLE_ENTITY, "not_coded", Value::Null),
        NotAssigned(_) => (StatusCode::UNPROCESSABLE_ENTITY, "not_assigned", Value::Null),
        PreviewAsset(_) => (StatusCode::UNPROCESSABLE_ENTITY, "preview_asset", Value::Null),
        Seek(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_code", Value::Null),
        Dump(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_dump", Value::Null),
        SchemaMismatch { .. } | CorruptJournal { .. } | Integrity(_) | Storage(_) => {
            (StatusCode::INTERNAL_SERVER_ERROR, "storage", Value::Null)
        }
    }
}

impl ApiError {
    pub fn status_and_code(&self) -> (StatusCode, &'static str, Value) {
        match self {
            ApiError::Registry(e) => registry_status(e),
            ApiError::Photo(PhotoError::Decode(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_image", Value::Null),
            ApiError::Photo(PhotoError::Missing(_)) => (StatusCode::NOT_FOUND, "not_found", Value::Null),
            ApiError::Photo(PhotoError::Io(_)) => (StatusCode::INTERNAL_SERVER_ERROR, "storage", Value::Null),
            ApiError::Feed(FeedError::Unreachable { .. }) => (StatusCode::BAD_GATEWAY, "feed_unreachable", Value::Null),
            ApiError::Feed(_) => (StatusCode::BAD_GATEWAY, "feed_error", Value::Null),
            ApiError::Gallery(GalleryError::NotCoded(_)) => (StatusCode::UNPROCESSABLE_ENTITY, "not_coded", Value::Null),
            ApiError::Gallery(GalleryError::Rank(RankError::Index(IndexError::EmptyGallery)))
            | ApiError::Gallery(GalleryError::Index(IndexError::EmptyGallery)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "empty_gallery", Value::Null)
            }
            ApiError::Gallery(GalleryError::Contour { .. } | GalleryError::Dump(_) | GalleryError::Rank(_)) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "invalid_query", Value::Null)
            }
            ApiError::Gallery(GalleryError::Index(_)) => (StatusCode::INTERNAL_SERVER_ERROR, "index", Value::Null),
            ApiError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request", Value::Null),
            ApiError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", Value::Null),
            ApiError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized", Value::Null),
            ApiError::Forbidden(_) => (StatusCode::FORBIDDEN, "forbidden", Value::Null),
            ApiError::FeedNotConfigured => (StatusCode::SERVICE_UNAVAILABLE, "feed_not_configured", Value::Null),
            ApiError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", Value::Null),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code, details) = self.status_and_code();
        if status.is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        let mut error = json!({ "code": code, "message": self.to_string() });
        if !details.is_null() {
            error["details"] = details;
        }
        (status, Json(json!({ "error": error }))).into_response()
    }
}
