use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("rotation is not orthonormal with determinant 1 (max |RᵀR - I| = {deviation:e}, det = {det})")]
    NotOrthonormal { deviation: f64, det: f64 },

    #[error("point is behind the camera (z = {z})")]
    BehindCamera { z: f64 },

    #[error("dToF cell ({row}, {col}) is invalid or out of range")]
    InvalidCell { row: usize, col: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("empty mask: no pixels to evaluate")]
    EmptyMask,

    #[error("weights are not normalized: {0}")]
    Unnormalized(String),

    #[error("degenerate system: {0}")]
    Degenerate(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// True when the failure came from the filesystem rather than the data.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io(_) => true,
            Error::Json(e) => e.is_io(),
            Error::Image(image::ImageError::IoError(_)) => true,
            _ => false,
        }
    }
}
