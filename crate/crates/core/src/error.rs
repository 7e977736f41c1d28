use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("brute-force guard exceeded: M={m} > max_m={max_m}")]
    GuardExceeded { m: usize, max_m: usize },
    #[error("infeasible selection: K={k} > |symbols|={available}")]
    Infeasible { k: usize, available: usize },
    #[error("symbol set not closed under {0}")]
    ClosureViolated(&'static str),
    #[error("output space too large: {0}; use the Monte Carlo / candidate-reduced path")]
    EnumerationLimit(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("parity-check matrix rank-deficient: rank {rank} < {rows} rows, beyond declared k={declared_k}")]
    RankDeficient {
        rank: usize,
        rows: usize,
        declared_k: usize,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
