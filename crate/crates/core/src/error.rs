use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("relaxation matrix is not symmetric positive definite (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("non-finite state at t = {time}")]
    NonFinite { time: f64 },

    #[error("state left the guard box at t = {time} (cell {cell})")]
    LeftBox { time: f64, cell: usize },

    #[error("system rejected: {0}")]
    SystemRejected(String),

    #[error("dx-floor: discretisation error proxy {proxy:e} exceeds 10% of the coarsest-eps error {coarsest:e}")]
    DxFloor { proxy: f64, coarsest: f64 },

    #[error("convergence table needs at least 3 rows, got {0}")]
    TooFewRows(usize),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
