use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, mollifier or run parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller passed incompatible arguments (mismatched grids, bad step size).
    #[error("usage error: {0}")]
    Usage(String),

    /// Input data violates a structural invariant (e.g. non-monotone quantile values).
    #[error("validation error: {0}")]
    Validation(String),

    /// A formula was evaluated outside its domain (e.g. zero mass in a generator).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
