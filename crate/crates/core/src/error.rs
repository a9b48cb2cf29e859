use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("operands live on different grids")]
    GridMismatch,

    #[error("symbol has {got} entries, grid has {expected} modes")]
    SymbolLayout { expected: usize, got: usize },

    /// The quadratization radicand went negative; `C0` is too small for this field.
    #[error("negative radicand {min:e} at cell {index} (increase C0)")]
    NegativeRadicand { min: f64, index: usize },

    #[error("linear solver did not converge: {iterations} iterations, residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("preconditioner is singular or non-finite at index {mode}")]
    SingularPreconditioner { mode: usize },

    #[error("invalid scheme: {0}")]
    InvalidScheme(String),

    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },

    #[error("snapshot: bad magic {0:?}")]
    BadMagic([u8; 4]),

    #[error("snapshot: unsupported version {0}")]
    VersionUnsupported(u32),

    #[error("snapshot: payload truncated (expected {expected} bytes, found {found})")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("trace parse error on line {line}: {msg}")]
    TraceParse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
