use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema error in {file}: field `{field}`: {reason}")]
    Schema {
        file: String,
        field: String,
        reason: String,
    },

    #[error("length mismatch: {field} has {found} rows, expected {expected}")]
    LengthMismatch {
        field: String,
        expected: usize,
        found: usize,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parameter parity unsatisfiable: best achieved {achieved} parameters against target {target}")]
    Parity { achieved: usize, target: usize },

    #[error("non-finite loss at step {step} in component `{component}`")]
    NonFiniteLoss { step: u64, component: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("tensor error: {0}")]
    Tensor(#[from] candle_core::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("plot error: {0}")]
    Plot(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable lower-case tag for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Schema { .. } => "schema",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::Config(_) => "config",
            Error::Contract(_) => "contract",
            Error::Parity { .. } => "parity",
            Error::NonFiniteLoss { .. } => "non_finite_loss",
            Error::Checkpoint(_) => "checkpoint",
            Error::Tensor(_) => "tensor",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Image(_) => "image",
            Error::Plot(_) => "plot",
        }
    }

    pub fn schema(file: impl Into<String>, field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Schema {
            file: file.into(),
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
