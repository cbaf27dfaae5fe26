use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range for {bound} modes")]
    Bounds { index: usize, bound: usize },

    #[error("unitarity violated (max deviation {deviation:.3e} > tolerance {tolerance:.1e})")]
    NotUnitary { deviation: f64, tolerance: f64 },

    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid photon number: {0}")]
    InvalidPhotonNumber(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("output pattern {0:?} has repeated modes; unordered marginals require distinct modes")]
    UnsupportedCollision(Vec<usize>),

    #[error("enumeration limit exceeded: {what} needs {needed} entries, limit is {limit}")]
    EnumerationLimit {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
