use thiserror::Error;

/// Errors raised anywhere in the laboratory.
#[derive(Debug, Error)]
pub enum NlsError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid field: {0}")]
    InvalidField(String),
    #[error("no sign change in shooting scan")]
    NoBracket,
    #[error("fixed-point solver did not converge at step {step} (t = {t})")]
    SolverDiverged { step: u64, t: f64 },
    #[error("no boundary: the grid is in free-space mode")]
    NoBoundary,
    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),
    #[error("window [{t1}, {t2}] is not covered by the series")]
    WindowUncovered { t1: f64, t2: f64 },
    #[error("series too short: {0}")]
    SeriesTooShort(String),
    #[error("config error at line {line}: key `{key}`: {msg}")]
    Config { line: usize, key: String, msg: String },
    #[error("corrupt data at row {row}: {msg}")]
    Corrupt { row: usize, msg: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NlsError>;
