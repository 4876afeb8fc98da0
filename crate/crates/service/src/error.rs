use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use amorph::{Error, ErrorKind};

/// JSON error envelope: `{"code", "field"?, "message"}`.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(code: &str, field: Option<&str>, message: impl Into<String>) -> Self {
        Self { status: StatusCode::BAD_REQUEST, code: code.into(), field: field.map(Into::into), message: message.into() }
    }

    pub fn too_large(message: impl Into<String>) -> Self {
        Self { status: StatusCode::PAYLOAD_TOO_LARGE, code: "payload_too_large".into(), field: None, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { status: StatusCode::INTERNAL_SERVER_ERROR, code: "internal".into(), field: None, message: message.into() }
    }

    /// Engine error attributed to an upload or parameter field.
    pub fn engine(err: Error, field: Option<&str>) -> Self {
        let status = match err.kind() {
            ErrorKind::Validation | ErrorKind::Io => StatusCode::BAD_REQUEST,
            ErrorKind::Degenerate => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let field = field.map(Into::into).or_else(|| param_field(&err).map(Into::into));
        Self { status, code: err.code().into(), field, message: err.to_string() }
    }
}

fn param_field(err: &Error) -> Option<&'static str> {
    match err {
        Error::InvalidAlpha(_) => Some("alpha"),
        Error::InvalidWeight(_) => Some("w"),
        Error::InvalidGrid { .. } => Some("grid"),
        Error::OverlappingRegions(_) => Some("regions2"),
        Error::PixelOutOfBounds { .. } => Some("pixel"),
        _ => None,
    }
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        Self::engine(err, None)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
