use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point has no coordinates")]
    EmptyPoint,
    #[error("coordinate {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("wrong arity: expected {expected} points, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("order must be at least 1")]
    InvalidOrder,
    #[error("sampler returned {found} points where {expected} were requested")]
    SamplerArity { expected: usize, found: usize },
    #[error("enumeration of {required} tuples exceeds budget {budget}")]
    BudgetExceeded { required: u128, budget: u128 },
    #[error("horizon {n} is smaller than order {l}")]
    HorizonTooSmall { n: usize, l: usize },
    #[error("horizon grid must be non-empty and strictly increasing")]
    BadGrid,
    #[error("horizon {horizon} exceeds prefix length {len}")]
    GridExceedsPrefix { horizon: usize, len: usize },
    #[error("trace has {len} estimates, verdict window needs {window}")]
    TraceTooShort { len: usize, window: usize },
    #[error("predicate has no per-index factorization")]
    NotFactorized,
    #[error("prefix of length {len} is too short for tail start {tail_start} at order {l}")]
    PrefixTooShort { len: usize, tail_start: usize, l: usize },
    #[error("no block boundary found within the prefix")]
    NoBlockBoundary,
    #[error("sequence is empty")]
    EmptySequence,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
