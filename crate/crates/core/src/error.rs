use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("point {point:?} lies outside the base domain")]
    OutsideBase { point: Vec<f64> },

    #[error("fiber is degenerate (empty or full) at {point:?}")]
    FiberDegenerate { point: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(String),

    #[error("iteration cap of {cap} exceeded (residual {residual:e})")]
    IterationCap { cap: usize, residual: f64 },

    #[error("boundary data not admissible: {0}")]
    NotAdmissibleData(String),

    #[error("syntax error at line {line}, column {col}: expected one of {expected:?}, found {found}")]
    Syntax {
        line: usize,
        col: usize,
        expected: Vec<String>,
        found: String,
    },

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("unknown builtin `{0}`")]
    UnknownBuiltin(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
