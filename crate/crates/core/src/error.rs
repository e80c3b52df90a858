use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("K must be at least 2 (got {0})")]
    TooFewChildren(usize),
    #[error("expected {expected} weights for K = {expected}, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weights must be positive")]
    NonPositiveWeight,
    #[error("{name} must lie in {range} (got {value})")]
    Domain {
        name: &'static str,
        range: &'static str,
        value: f64,
    },
    #[error("vertex {0} is not in the tree")]
    MissingVertex(usize),
    #[error("operation needs real birth times; tree was grown in discrete time")]
    DiscreteTime,
    #[error("level {0} has no vertices")]
    EmptyLevel(usize),
    #[error("vertex {vertex} at depth {depth} has no children; grow a larger tree to reach depth {target}")]
    InsufficientGrowth {
        vertex: usize,
        depth: usize,
        target: usize,
    },
    #[error("path does not belong to this tree")]
    ForeignPath,
    #[error("size-biased choice needs non-negative inputs with at least one positive product")]
    DegenerateWeights,
    #[error("exact enumeration is limited to {max} vertices (got {got})")]
    EnumerationTooLarge { max: usize, got: usize },
    #[error("sample has {got} vertices, distribution has {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid shape encoding")]
    InvalidShape,
    #[error("not enough samples: {0}")]
    TooFewSamples(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
