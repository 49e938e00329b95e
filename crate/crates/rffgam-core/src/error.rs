use thiserror::Error;

/// Error type shared by every stage of the pipeline.
///
/// The CLI maps `InvalidArgument`/`Config`/`Io`/`Parse` to exit code 2 and
/// `Numerical` to exit code 3.
#[derive(Error, Debug)]
pub enum RffGamError {
    /// Caller handed an operation something structurally unusable
    /// (dimension mismatch, empty split, out-of-range parameter, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A linear solve, factorization, or iteration broke down numerically.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The run configuration is inconsistent or unusable.
    #[error("configuration error: {0}")]
    Config(String),

    /// File-level problems while reading or writing artifacts.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A dataset, config, or model file did not parse.
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, RffGamError>;

impl RffGamError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        RffGamError::InvalidArgument(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        RffGamError::Numerical(msg.into())
    }
}
