use alloc::string::String;

/// Errors raised by the clustering core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("edge {index}: self-loop on node {node}")]
    SelfLoop { index: usize, node: u64 },

    #[error("edge {index}: weight {weight} is not positive and finite")]
    InvalidWeight { index: usize, weight: f64 },

    #[error("unknown shape kind `{0}`")]
    UnknownShape(String),

    #[error("k1 = {k} nearest neighbours requested but only {n} points")]
    TooFewPoints { k: usize, n: usize },

    #[error("bandwidth heuristic collapsed to zero (all neighbour distances are zero)")]
    DegenerateBandwidth,

    #[error("node {0} is isolated (degree 0)")]
    IsolatedNode(usize),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("graph has {n} nodes, above the dense limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("right-hand side is not orthogonal to the constant vector (|1'y| = {sum:e})")]
    InconsistentRhs { sum: f64 },

    #[error("eigensolver failed: {0}")]
    Eigen(String),

    #[error("cannot form {k} clusters from {n} points")]
    TooManyClusters { k: usize, n: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
