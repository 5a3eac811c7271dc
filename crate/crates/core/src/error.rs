use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("non-finite value at position {index}")]
    NonFinite { index: usize },

    #[error("matrix dimension must be at least 1")]
    EmptyDimension,

    #[error("zero diagonal entry at index {index}")]
    ZeroDiagonal { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("column {column} is not stochastic (sum {sum})")]
    NotStochastic { column: usize, sum: f64 },

    #[error("matrix has no nonzero entry")]
    AllZero,

    #[error("operation requires an operator without rank-one part")]
    RankOneUnsupported,

    #[error("self-loop at node {node} has weight {weight} >= 1; diffusion diverges")]
    DivergentSelfLoop { node: usize, weight: f64 },

    #[error("cannot eliminate the self-loop of node {node} as a link")]
    SelfElimination { node: usize },

    #[error("node {node} still carries a self-loop of weight {weight}")]
    SelfLoopPresent { node: usize, weight: f64 },

    #[error("no link from node {from} to node {to}")]
    MissingLink { from: usize, to: usize },

    #[error("fill-in guard tripped: {links} stored links exceeds limit {limit}")]
    FillInExceeded { links: usize, limit: usize },

    #[error("error bound unavailable: max column abs sum {rho} >= 1")]
    BoundUnavailable { rho: f64 },

    #[error("incompatible schedule: {0}")]
    IncompatibleSchedule(String),

    #[error("matrix is singular (pivot column {column})")]
    Singular { column: usize },

    #[error("iteration diverged after {iterations} iterations")]
    Diverged { iterations: usize },
}
