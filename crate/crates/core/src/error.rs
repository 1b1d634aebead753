use alloc::string::String;

/// Errors raised by aggregation rules, attacks and the simulation engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("zero-norm vector has no direction")]
    ZeroNorm,

    #[error("non-finite value in parameter vector")]
    NonFinite,

    #[error("weights must be non-negative and sum to a positive value")]
    DegenerateWeights,

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("unknown node id {0}")]
    UnknownNode(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
