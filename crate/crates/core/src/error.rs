use std::io;

use thiserror::Error;

use crate::net::ModelCheckpoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("index {index} out of range (valid: {valid})")]
    Index { index: usize, valid: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite gradient in `{param}`")]
    NonFiniteGradient { param: String },

    #[error("training failed: {reason}")]
    TrainingFailure {
        reason: String,
        last_good: Option<Box<ModelCheckpoint>>,
    },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("demonstration failed: {0}")]
    DemoFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o: {0}")]
    Io(#[from] io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            Error::TrainingFailure { .. } | Error::NonFiniteGradient { .. } => 4,
            _ => 3,
        }
    }
}
