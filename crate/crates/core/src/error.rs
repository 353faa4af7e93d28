use thiserror::Error;

/// Errors raised by the skeleton maximal operator library.
#[derive(Debug, Error)]
pub enum Error {
    /// Dimension / face-dimension pair outside `0 <= k < n`, or a point
    /// outside the domain it was evaluated on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent grids, bad spacing, or other invalid setup.
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller-side precondition that the operation cannot repair.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Exhaustive search refused because the instance is too large.
    #[error("instance too large: {0}")]
    Size(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
