use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("non-finite value at pixel index {index}")]
    NonFinite { index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("image {width}x{height} is smaller than patch size {patch_size}")]
    ImageSmallerThanPatch {
        width: usize,
        height: usize,
        patch_size: usize,
    },

    #[error("placement failed: {0}")]
    Placement(String),

    #[error("patch origin {origin:?} is not aligned with the patch grid")]
    MisalignedPatch { origin: (usize, usize) },

    #[error("provider `{provider}` failed on request {request_id}: {message}")]
    Provider {
        provider: String,
        request_id: u64,
        message: String,
    },

    #[error("format error at byte offset {offset}: {message}")]
    Format { offset: usize, message: String },

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
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::InvalidRaster(_) => "invalid_raster",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::ImageSmallerThanPatch { .. } => "image_smaller_than_patch",
            Error::Placement(_) => "placement",
            Error::MisalignedPatch { .. } => "misaligned_patch",
            Error::Provider { .. } => "provider",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Codec(_) => "codec",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
