use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,

    #[error("non-finite log-density for entry `{id}`")]
    NonFiniteInput { id: String },

    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },

    #[error(
        "zero variance: every log-density difference is identical, \
         so the two log-density streams differ only by a constant"
    )]
    ZeroVariance,

    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("Hermite order {0} is not supported (max 8)")]
    UnsupportedOrder(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("duplicate point: zero nearest-neighbour distance at row {row}")]
    DuplicatePoint { row: usize },

    #[error("samples must have equal sizes ({left} vs {right})")]
    UnequalSizes { left: usize, right: usize },

    #[error("problem too large: {size} exceeds limit {limit}")]
    TooLarge { size: usize, limit: usize },

    #[error("invalid subsample block {block} for n = {n}")]
    InvalidBlock { block: usize, n: usize },

    #[error("log-density is -inf for a draw from the reference model: supports do not nest")]
    SupportMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("join error: ids missing from one of the files: {}", .missing.join(", "))]
    Join { missing: Vec<String> },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
