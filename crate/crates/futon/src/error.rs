use thiserror::Error;

/// Error type shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Input value outside its mathematical domain (e.g. coordinate not in `[0,1]`).
    #[error("domain error: {0}")]
    Domain(String),

    /// Array/tensor extents do not line up.
    #[error("shape error: {0}")]
    Shape(String),

    /// Requested resolution cannot be represented (quadrature too coarse,
    /// truncation too large for the grid, oracle guardrail exceeded).
    #[error("resolution error: {0}")]
    Resolution(String),

    /// Wrong number of operands.
    #[error("arity error: {0}")]
    Arity(String),

    /// Index outside the valid range.
    #[error("index error: {0}")]
    Index(String),

    /// Inconsistent or invalid configuration.
    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
    pub fn resolution(msg: impl Into<String>) -> Self {
        Error::Resolution(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
