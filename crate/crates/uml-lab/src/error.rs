//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Preconditions on an operation's inputs were violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A classifier head is degenerate for the requested computation
    /// (e.g. identical weight rows for the two classes under comparison).
    #[error("degenerate head: {0}")]
    DegenerateHead(String),

    /// Geometric construction collapsed (e.g. projection axes coincide).
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    /// A least-squares fit had a rank-deficient design.
    #[error("rank-deficient fit: {0}")]
    RankDeficientFit(String),

    /// A file did not conform to an expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
