use thiserror::Error;

use crate::constraints::ReducibilityWitness;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no constraints requested")]
    NoConstraints,

    #[error("invalid constraint matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid domain grid: {0}")]
    InvalidGrid(String),

    #[error("duplicate constraint pair ({lower}, {upper})")]
    DuplicatePair { lower: usize, upper: usize },

    #[error("constraint matrix is reducible: {0}")]
    Reducible(ReducibilityWitness),

    #[error("order contains a cycle through domain {0}")]
    CyclicOrder(usize),

    #[error("weights must be strictly positive (index {index} has {value})")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cycling detected after {0} active-set iterations")]
    Cycling(usize),

    #[error("not a valid face")]
    InvalidFace,

    #[error("face enumeration refused: {0} edges exceeds the limit of {1}")]
    TooManyEdges(usize, usize),

    #[error("closed form limited to {1} domains, got {0}")]
    TooManyDomains(usize, usize),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    /// 1-based domain ids.
    #[error("domains without sampled units: {0:?}")]
    EmptyDomains(Vec<usize>),

    #[error("joint inclusion probabilities unavailable: {0}")]
    MissingJointProbabilities(String),

    #[error("replicate variance needs at least 2 replicates, got {0}")]
    TooFewReplicates(usize),

    #[error("{groups} groups exceed the smallest stratum sample size {smallest}")]
    TooManyGroups { groups: usize, smallest: usize },

    #[error("invalid replicate weights: {0}")]
    InvalidReplicates(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
