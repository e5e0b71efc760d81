use thiserror::Error;

/// Errors raised by the codec, channel, precoding, detection and harness layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScimError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("payload has {actual} bits, expected {expected}")]
    PayloadLength { expected: usize, actual: usize },

    #[error("rank {rank} is not below {limit}")]
    RankOutOfRange { rank: String, limit: String },

    #[error("support violates the index-modulation structure: {0}")]
    InvalidSupport(String),

    #[error("value {0} is not a constellation point")]
    NotInConstellation(String),

    #[error("column {0} is zero")]
    ZeroColumn(usize),

    #[error("rank-deficient least-squares system at column {0}")]
    RankDeficient(usize),

    #[error("covariance lost positive definiteness")]
    NotPositiveDefinite,

    #[error("search space of {0} candidates exceeds the exhaustive-search guard")]
    SearchTooLarge(u128),

    #[error("all-zero block")]
    ZeroBlock,

    #[error("config parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, ScimError>;

pub(crate) fn invalid(msg: impl Into<String>) -> ScimError {
    ScimError::InvalidConfig(msg.into())
}
