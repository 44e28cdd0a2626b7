use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The grid carries no intensity, so no centroid or volume is defined.
    #[error("grid has zero total intensity")]
    AllZeroGrid,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("target pitch {target_um} um is finer than source pitch {source_um} um")]
    UpsampleNotSupported { source_um: f64, target_um: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Training diverged; usually the learning rate is too high.
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {0}")]
    BadVersion(u32),

    #[error("file is truncated")]
    TruncatedFile,

    #[error("distance {distance_mm} mm is not beyond the focal length {focal_length_mm} mm")]
    BehindFocalPlane {
        distance_mm: f64,
        focal_length_mm: f64,
    },

    /// The model was trained for a different sensor pixel pitch than the image.
    #[error("kernel pitch {kernel_um} um does not match image pitch {image_um} um")]
    PitchMismatch { kernel_um: f64, image_um: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
