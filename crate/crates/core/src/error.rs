use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate operator: null space has dimension {dim}, expected 1")]
    DegenerateOperator { dim: usize },

    #[error("signal generation failed after {attempts} attempts")]
    GenerationFailure { attempts: usize },

    #[error("packing construction failed after {restarts} restarts (best minimum distance {best_min_distance})")]
    PackingFailure { restarts: usize, best_min_distance: f64 },

    #[error("no consistent cosupport found with subspace dimension <= {b_max}")]
    NoSolution { b_max: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
