use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: n = {n} is below the minimum n = {min_n} for theta = {theta}")]
    Infeasible { theta: f64, n: usize, min_n: usize },

    #[error("resource limit exceeded: {0}")]
    Resource(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed model file: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
