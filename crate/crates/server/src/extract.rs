use axum::extract::{FromRequest, FromRequestParts, Query, Request};
use axum::http::header::AUTHORIZATION;
use axum::http::request::Parts;
use axum::Json;
use cardiolabel_core::auth::Identity;
use serde::de::DeserializeOwned;

use crate::error::ApiError;
use crate::{blocking, AppState};

/// The authenticated caller. Listed first among a handler's arguments so
/// that a missing or expired token is rejected before anything else runs.
pub struct Caller {
    pub identity: Identity,
    pub token: String,
}

impl FromRequestParts<AppState> for Caller {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, ApiError> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| ApiError::new(401, "missing_token", "a bearer token is required"))?
            .to_string();
        let auth = state.auth.clone();
        let t = token.clone();
        let identity = blocking(move || Ok(auth.authenticate(&t)?)).await?;
        Ok(Caller { identity, token })
    }
}

/// JSON body whose rejections use the API error format.
pub struct ApiJson<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for ApiJson<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state)
            .await
            .map(|Json(v)| ApiJson(v))
            .map_err(|rej| ApiError::new(422, "invalid_body", rej.body_text()))
    }
}

/// Query string whose rejections use the API error format.
pub struct ApiQuery<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for ApiQuery<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, ApiError> {
        Query::<T>::from_request_parts(parts, state)
            .await
            .map(|Query(v)| ApiQuery(v))
            .map_err(|rej| ApiError::new(422, "invalid_query", rej.body_text()))
    }
}
