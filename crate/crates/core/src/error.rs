use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants are grouped into classes (see [`Error::class`]) that the CLI maps
/// onto distinct exit codes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("row {row} sums to 1{deviation:+e}")]
    RowSumViolation { row: usize, deviation: f64 },

    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },

    #[error("matrix is not rectangular: row {row} has {len} entries, expected {expected}")]
    Ragged {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("empty alphabet or matrix")]
    Empty,

    #[error("index {index} out of range for alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unsupported conditional: {0}")]
    UnsupportedConditional(String),

    #[error("absolute continuity violated at index {index}: p={p}, q=0")]
    AbsoluteContinuityViolation { index: usize, p: f64 },

    #[error("point ({u},{x},{y},{z}) has zero probability")]
    ZeroProbabilityPoint {
        u: usize,
        x: usize,
        y: usize,
        z: usize,
    },

    #[error("value {value} out of domain: {what}")]
    OutOfDomain { what: &'static str, value: f64 },

    #[error("state space of {size} cells exceeds the enumeration limit {limit}")]
    StateSpaceTooLarge { size: u128, limit: u128 },

    #[error("normalizer at step {step} degenerated (log C = {log_c})")]
    DegenerateNormalizer { step: usize, log_c: f64 },

    #[error("optimizer did not converge: {0}")]
    OptimizerDidNotConverge(String),

    #[error("property violated: {0}")]
    PropertyViolation(String),

    #[error("bound violated: {0}")]
    BoundViolated(String),

    #[error("rate condition unmet: {0}")]
    RateConditionUnmet(String),

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("configuration error: {0}")]
    ConfigParse(String),

    #[error("channel validation failed: {0}")]
    ChannelValidation(String),
}

/// Coarse error classes used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Validation,
    Numeric,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            ConfigParse(_) => ErrorClass::Config,
            NegativeEntry { .. }
            | RowSumViolation { .. }
            | NonFiniteEntry { .. }
            | Ragged { .. }
            | Empty
            | ChannelValidation(_)
            | IndexOutOfRange { .. }
            | LengthMismatch(..)
            | DimensionMismatch(_)
            | OutOfDomain { .. }
            | RateConditionUnmet(_) => ErrorClass::Validation,
            _ => ErrorClass::Numeric,
        }
    }

    /// Process exit code: 2 config, 3 validation, 4 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self.class() {
            ErrorClass::Config => 2,
            ErrorClass::Validation => 3,
            ErrorClass::Numeric => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
