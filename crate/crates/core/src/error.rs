//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any stage of the pipeline.
#[derive(Error, Debug)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("dataset is empty")]
    EmptyData,

    #[error("insufficient data: need at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("csv ingestion failed at row {row}, column '{column}': {message}")]
    CsvIngestion {
        row: usize,
        column: String,
        message: String,
    },

    #[error("non-finite value at row {row}, column '{column}'")]
    NonFinite { row: usize, column: String },

    #[error("unknown example id {id}")]
    UnknownId { id: u64 },

    #[error("operation requires a classification dataset (integer labels)")]
    UnsupportedTask,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("objective '{tag}' requires an anchor parameter vector")]
    MissingAnchor { tag: &'static str },

    #[error("training diverged at epoch {epoch} (objective value {value})")]
    Divergence { epoch: usize, value: f64 },

    #[error("curvature matrix is singular at zero damping (smallest eigenvalue {min_eigenvalue:.3e})")]
    SingularCurvature { min_eigenvalue: f64 },

    #[error("operator is not positive definite (p'Ap = {quadratic:.3e} at iteration {iteration})")]
    IndefiniteOperator { quadratic: f64, iteration: usize },

    #[error("LiSSA diverged at step {step}: scale too small for the operator spectrum")]
    ScaleTooSmall { step: usize },

    #[error("dimension {dim} exceeds the exact-solver cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("LiSSA tuning failed: no scale in the grid converged; residuals: {0}")]
    TuningFailed(String),

    #[error("{context}: {tag}: {source}")]
    Tagged {
        context: &'static str,
        tag: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

impl Error {
    /// Wrap an error with the trial or objective tag it occurred under.
    pub fn tagged(context: &'static str, tag: impl Into<String>, source: Error) -> Self {
        Error::Tagged {
            context,
            tag: tag.into(),
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
