use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate polygon: {0}")]
    DegeneratePolygon(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coefficient not in D(alpha={alpha}, beta={beta}): min {min} at {min_at:?}, max {max} at {max_at:?}")]
    Membership {
        alpha: f64,
        beta: f64,
        min: f64,
        min_at: [f64; 2],
        max: f64,
        max_at: [f64; 2],
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("encoded coefficients leave the admissible cone: beta_tilde = {beta_tilde} >= alpha = {alpha}")]
    Envelope { alpha: f64, beta_tilde: f64 },

    #[error("certificate violated: {0}")]
    Certificate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
