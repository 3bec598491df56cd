//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is singular (pivot {pivot} below threshold)")]
    Singular { pivot: usize },

    #[error("matrix is not Hurwitz: max eigenvalue real part {max_re}")]
    NonHurwitz { max_re: f64 },

    #[error("iteration failed to converge: {0}")]
    Convergence(String),

    #[error("(A, B) is not controllable")]
    Controllability,

    #[error("reference feedforward undefined: C(A+BK)^-1 B is zero")]
    Feedforward,

    #[error("design error: {0}")]
    Design(String),

    #[error("input history does not cover the requested window: {0}")]
    History(String),

    #[error("block assembly error: {0}")]
    Assembly(String),

    #[error("LMI solver failed: {0}")]
    Solver(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
