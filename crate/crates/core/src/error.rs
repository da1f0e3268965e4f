use thiserror::Error;

/// Errors produced by the tabulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A number-theoretic precondition failed (shared factor, even modulus, ...).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("size budget exceeded: {what} needs {requested}, limit is {limit}")]
    Budget {
        what: &'static str,
        requested: u64,
        limit: u64,
    },

    #[error("{n} is outside the factor table (limit {limit})")]
    OutOfTable { n: u64, limit: u64 },

    /// A cofactor could not be split far enough to rule out prime divisors
    /// inside the requested range.
    #[error("incomplete factorization: cofactor of {bits} bits may hold a prime in ({lo}, {hi}]")]
    IncompleteFactorization { bits: u64, lo: u64, hi: u64 },

    #[error("pre-product {k}: {source}")]
    WorkUnit {
        k: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("run interrupted after {completed} completed subtrees")]
    Interrupted { completed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
