use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI (exit codes) and the HTTP service (status codes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Malformed or contract-violating input.
    Validation,
    /// Input is well formed but describes a degenerate face.
    Degenerate,
    /// Filesystem or codec failure.
    Io,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("landmark count: expected 68, found {0}")]
    LandmarkCount(usize),
    #[error("landmark {index} at ({x}, {y}) lies outside the {width}x{height} image")]
    LandmarkOutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("unknown label {0} in parsing map (expected 0..=3)")]
    UnknownLabel(u8),
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: String,
        found: String,
    },
    #[error("image too small: {width}x{height} (minimum 8x8)")]
    ImageTooSmall { width: usize, height: usize },
    #[error("sample value {0} outside the unit interval")]
    ValueOutOfRange(f64),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("empty face: parsing map has no skin, lip or eye pixels")]
    EmptyFace,
    #[error("invalid working grid {height}x{width}: sides must be powers of two in 16..=256")]
    InvalidGrid { height: usize, width: usize },
    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),
    #[error("affine transform is not invertible")]
    NonInvertible,
    #[error("visual feature weight must be finite and >= 0, got {0}")]
    InvalidWeight(f64),
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("window radius must be >= 1, got {0}")]
    InvalidWindow(usize),
    #[error("region masks overlap at pixel {0}")]
    OverlappingMasks(usize),
    #[error("region selections of the two references overlap on {0}")]
    OverlappingRegions(String),
    #[error("pixel ({row}, {col}) outside the {height}x{width} grid")]
    PixelOutOfBounds {
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::EmptyFace | Error::DegenerateParams(_) => ErrorKind::Degenerate,
            Error::Io { .. } => ErrorKind::Io,
            Error::NonFinite(_) => ErrorKind::Internal,
            _ => ErrorKind::Validation,
        }
    }

    /// Short machine-readable code, stable across releases.
    pub fn code(&self) -> &'static str {
        match self {
            Error::LandmarkCount(_) => "landmark_count",
            Error::LandmarkOutOfBounds { .. } => "landmark_bounds",
            Error::UnknownLabel(_) => "unknown_label",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::ImageTooSmall { .. } => "image_too_small",
            Error::ValueOutOfRange(_) => "value_range",
            Error::NonFinite(_) => "non_finite",
            Error::EmptyFace => "empty_face",
            Error::InvalidGrid { .. } => "invalid_grid",
            Error::DegenerateParams(_) => "degenerate_params",
            Error::NonInvertible => "non_invertible",
            Error::InvalidWeight(_) => "invalid_weight",
            Error::InvalidAlpha(_) => "invalid_alpha",
            Error::InvalidWindow(_) => "invalid_window",
            Error::OverlappingMasks(_) => "overlapping_masks",
            Error::OverlappingRegions(_) => "overlapping_regions",
            Error::PixelOutOfBounds { .. } => "pixel_bounds",
            Error::InvalidRequest(_) => "invalid_request",
            Error::Io { .. } => "io",
            Error::Codec(_) => "codec",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn mismatch(
        what: &'static str,
        expected: impl std::fmt::Debug,
        found: impl std::fmt::Debug,
    ) -> Self {
        Error::DimensionMismatch {
            what,
            expected: format!("{expected:?}"),
            found: format!("{found:?}"),
        }
    }
}
