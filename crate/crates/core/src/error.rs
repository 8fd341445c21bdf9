//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by unmixing operations.
#[derive(Error, Debug)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),

    #[error("empty signal")]
    EmptySignal,

    #[error("matrix is not positive definite (pivot {pivot:.3e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("grid with {n} pixels exceeds the dense-solve cap of {cap}")]
    GridTooLargeForDense { n: usize, cap: usize },

    #[error("problem too large for a dense eigensolve: {dim} > {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("reference abundances are identically zero")]
    ZeroReference,

    #[error("library column {0} has zero norm")]
    ZeroColumn(usize),

    #[error("clean cube has zero signal energy")]
    ZeroSignal,

    #[error("requested {q} endmembers but the library has only {m} signatures")]
    TooManyEndmembers { q: usize, m: usize },

    #[error("coherence target {0} is unreachable (must be < 1)")]
    UnreachableCoherence(f64),

    #[error("invalid configuration: {0}")]
    ConfigError(String),

    #[error("solver diverged at iteration {iter}: {what}")]
    Diverged { iter: usize, what: String },

    #[error("bad magic bytes (expected \"HSUMTX01\")")]
    BadMagic,

    #[error("truncated file: {0}")]
    TruncatedFile(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
