use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("shape mismatch: expected {expected} values, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("growth certificate rejected: worst margin {worst_margin:e} at {worst_point:?}")]
    CertificateFailed {
        worst_margin: f64,
        worst_point: Vec<f64>,
    },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("snapshot parse error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
