use thiserror::Error;

/// Errors raised by estimators, strategies and oracles.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum RaviError {
    /// A density that must be positive evaluated to zero.
    #[error("support violation: {0}")]
    SupportViolation(String),

    /// A strategy was used in a direction its declared support kind does not allow.
    #[error("strategy kind mismatch: {0}")]
    KindMismatch(String),

    /// Every outcome of a discrete choice had zero weight.
    #[error("discrete choice with no positive weight")]
    EmptyDistribution,

    /// A continuous random choice was reached while enumerating.
    #[error("computation is not enumerable: {0}")]
    NotEnumerable(&'static str),

    /// Exhaustive enumeration exceeded its path budget.
    #[error("enumeration exceeded {0} paths")]
    EnumerationLimit(usize),

    /// A rejection sampler saw a weight above its declared bound.
    #[error("importance weight {log_weight} exceeds log bound {log_bound}")]
    BoundExceeded { log_weight: f64, log_bound: f64 },

    /// A rejection sampler gave up.
    #[error("no sample accepted after {0} tries")]
    TooManyRejections(usize),

    /// A reparameterized estimator reached a node without a pushforward.
    #[error("strategy node is not reparameterizable")]
    NotReparameterizable,

    /// The time reversal of an annealing kernel cannot be sampled.
    #[error("time reversal unavailable: {0}")]
    TimeReversalUnavailable(String),

    /// A character outside the bigram model's alphabet.
    #[error("character {0:?} is outside the alphabet")]
    OutOfAlphabet(char),

    /// Malformed partition of dataset indices.
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    /// A constructor or operation received an invalid argument.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = RaviError> = std::result::Result<T, E>;
