//! Crate-wide error type.

/// Errors reported by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Configuration rejected before any computation started.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data violated a structural precondition (parse failure,
    /// duplicate id, non-positive scale value, and so on).
    #[error("invalid data: {0}")]
    Data(String),

    /// Matrix dimensions do not conform.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A cluster lost all of its members and repair failed.
    #[error("cluster {0} has no members")]
    EmptyCluster(usize),

    /// Every restart aborted, usually from persistent empty clusters.
    #[error("all {0} restarts aborted")]
    AllRestartsAborted(usize),

    /// The design matrix is rank deficient; the named columns are the ones
    /// that could not be pivoted in.
    #[error("rank-deficient design, collinear columns: {0:?}")]
    RankDeficient(Vec<String>),

    /// Degenerate numerical input (zero variance, zero singular values, ...).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// Underlying I/O failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
