use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use cardiolabel_core::annotation::AnnotationError;
use cardiolabel_core::auth::AuthError;
use cardiolabel_core::catalog::CatalogError;
use serde::Serialize;

/// Every `code` an error response can carry.
pub const ERROR_CODES: &[&str] = &[
    "missing_token",
    "invalid_session",
    "invalid_credentials",
    "not_admin",
    "not_a_member",
    "not_an_expert",
    "not_owner_nor_expert",
    "unknown_dataset",
    "unknown_record",
    "unknown_annotation",
    "unknown_user",
    "not_found",
    "code_already_used",
    "username_taken",
    "duplicate_dataset",
    "annotation_superseded",
    "revision_conflict",
    "invalid_code",
    "invalid_role",
    "invalid_username",
    "weak_password",
    "invalid_vocabulary",
    "not_expert_role",
    "unknown_label_code",
    "empty_confirmed",
    "missing_override_labels",
    "at_boundary",
    "position_out_of_range",
    "bad_window",
    "unknown_lead",
    "bad_max_buckets",
    "invalid_body",
    "invalid_query",
    "internal",
];

/// An error response: `{"code": ..., "message": ...}` with a status.
/// The `code` strings are part of the public contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

#[derive(Serialize)]
struct Body<'a> {
    code: &'a str,
    message: &'a str,
}

impl ApiError {
    pub fn new(status: u16, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status: StatusCode::from_u16(status).expect("valid status"),
            code,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        let message = message.into();
        tracing::error!(%message, "internal error");
        ApiError::new(500, "internal", "internal server error")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            code: self.code,
            message: &self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<AuthError> for ApiError {
    fn from(e: AuthError) -> Self {
        use AuthError::*;
        let msg = e.to_string();
        match e {
            NotAdmin => ApiError::new(403, "not_admin", msg),
            InvalidRole => ApiError::new(422, "invalid_role", msg),
            InvalidCode => ApiError::new(422, "invalid_code", msg),
            CodeAlreadyUsed => ApiError::new(409, "code_already_used", msg),
            UsernameTaken => ApiError::new(409, "username_taken", msg),
            InvalidUsername => ApiError::new(422, "invalid_username", msg),
            WeakPassword => ApiError::new(422, "weak_password", msg),
            InvalidCredentials => ApiError::new(401, "invalid_credentials", msg),
            InvalidOrExpiredSession => ApiError::new(401, "invalid_session", msg),
            UnknownUser(_) => ApiError::new(404, "unknown_user", msg),
            Hashing(_) | Storage(_) => ApiError::internal(msg),
        }
    }
}

impl From<AnnotationError> for ApiError {
    fn from(e: AnnotationError) -> Self {
        use AnnotationError::*;
        let msg = e.to_string();
        match e {
            UnknownDataset(_) => ApiError::new(404, "unknown_dataset", msg),
            UnknownRecord(_) => ApiError::new(404, "unknown_record", msg),
            UnknownAnnotation(_) => ApiError::new(404, "unknown_annotation", msg),
            UnknownUser(_) => ApiError::new(404, "unknown_user", msg),
            DuplicateDataset(_) => ApiError::new(409, "duplicate_dataset", msg),
            InvalidVocabulary(_) => ApiError::new(422, "invalid_vocabulary", msg),
            NotExpertRole { .. } => ApiError::new(422, "not_expert_role", msg),
            NotAMember => ApiError::new(403, "not_a_member", msg),
            NotAnExpert => ApiError::new(403, "not_an_expert", msg),
            NotOwnerNorExpert => ApiError::new(403, "not_owner_nor_expert", msg),
            UnknownLabelCode(_) => ApiError::new(422, "unknown_label_code", msg),
            EmptyConfirmed => ApiError::new(422, "empty_confirmed", msg),
            MissingOverrideLabels => ApiError::new(422, "missing_override_labels", msg),
            AtBoundary => ApiError::new(422, "at_boundary", msg),
            PositionOutOfRange { .. } => ApiError::new(422, "position_out_of_range", msg),
            Superseded(_) => ApiError::new(409, "annotation_superseded", msg),
            RevisionMismatch { .. } => ApiError::new(409, "revision_conflict", msg),
            Storage(_) => ApiError::internal(msg),
        }
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        let msg = e.to_string();
        match e {
            CatalogError::Annotation(a) => a.into(),
            CatalogError::Window(_) => ApiError::new(422, "bad_window", msg),
            CatalogError::UnknownLead(_) => ApiError::new(422, "unknown_lead", msg),
            CatalogError::BucketCount(_) => ApiError::new(422, "bad_max_buckets", msg),
            CatalogError::Storage(_) => ApiError::internal(msg),
        }
    }
}
