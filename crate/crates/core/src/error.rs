use thiserror::Error;

/// Errors raised across the workbench.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not Hermitian (asymmetry {0:.3e})")]
    NotHermitian(f64),

    /// Zero-forcing needs a full column rank backward channel.
    #[error("rank-deficient channel matrix (condition number {0:.3e}); use the MF receiver instead")]
    RankDeficient(f64),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no randomized candidate satisfies the constraints")]
    NoFeasibleCandidate,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
