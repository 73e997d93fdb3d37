use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no pose pairs")]
    NoPosePairs,

    #[error("degenerate rotation set")]
    DegenerateRotations,

    #[error("pixel ({u}, {v}) outside {width}x{height} image")]
    PixelOutOfRange {
        u: f64,
        v: f64,
        width: usize,
        height: usize,
    },

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate calibration pairs: {0}")]
    DegenerateCalibration(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("backward called without a recorded forward pass")]
    NoForward,

    #[error("training diverged at iteration {iteration} (stage {stage}, lr shared={lr_shared:e} well={lr_well:e} fast={lr_fast:e})")]
    Diverged {
        iteration: u64,
        stage: u8,
        lr_shared: f64,
        lr_well: f64,
        lr_fast: f64,
    },

    #[error("checkpoint version mismatch: file has {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{}: {reason}", path.display())]
    Format { path: PathBuf, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl std::fmt::Display) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-parsable category, used by the command-line tool.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NoPosePairs | Error::DegenerateRotations => "geometry",
            Error::PixelOutOfRange { .. } | Error::InvalidCamera(_) => "camera",
            Error::DimensionMismatch(_) => "dimension",
            Error::DegenerateCalibration(_) => "calibration",
            Error::EmptyBatch | Error::NoForward | Error::Diverged { .. } => "training",
            Error::VersionMismatch { .. } => "checkpoint",
            Error::Config(_) => "config",
            Error::Invalid(_) => "input",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
        }
    }
}
