use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("operator width {width} exceeds the dense capacity of {cap} qubits")]
    Capacity { width: usize, cap: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("width mismatch: {left} vs {right}")]
    WidthMismatch { left: usize, right: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("state is not normalized (norm {0})")]
    Norm(f64),

    #[error("level {level} out of range for d = {d}")]
    LevelOutOfRange { level: usize, d: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("no eigenvector has overlap above {threshold} with the target state")]
    NoOverlap { threshold: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
