//! Error type shared by every module in the crate.

use thiserror::Error;

/// Errors raised by solver, task, and persistence operations.
#[derive(Error, Debug)]
pub enum CoreError {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A value fell outside its documented range.
    #[error("out of range: {0}")]
    OutOfRange(String),

    /// An objective, gradient, or iterate became non-finite.
    #[error("numeric failure at iteration {iter}: {what}")]
    NumericFailure { iter: u64, what: String },

    /// A swept solution ended above its constraint level.
    #[error("constraint violation at sweep index {index}: f1 = {f1} > epsilon = {epsilon} + tol")]
    ConstraintViolation { index: usize, epsilon: f64, f1: f64 },

    /// A series had no usable points after transformation.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// A checkpoint or result file failed structural validation.
    #[error("format error at byte offset {offset}: {what}")]
    Format { offset: u64, what: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;

impl CoreError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        CoreError::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}
