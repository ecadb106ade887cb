use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("node index {index} out of range for {n} nodes")]
    InvalidSet { index: usize, n: usize },

    #[error("node set over {got} nodes used with an instance of {expected} nodes")]
    UniverseMismatch { expected: usize, got: usize },

    #[error("degenerate instance: every node has zero cost, the budget constraint is vacuous")]
    DegenerateInstance,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("lambda sequence must be strictly decreasing and nonnegative (position {position})")]
    NonMonotoneLambdas { position: usize },

    #[error("capacities do not fit in 64-bit integers after scaling by {denominator}")]
    Overflow { denominator: i128 },

    #[error("instance has {n} nodes, enumeration is limited to {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("start set costs {cost} which exceeds the budget {budget}")]
    InfeasibleStart { cost: i64, budget: i64 },

    #[error("envelope was built for a different instance")]
    EnvelopeMismatch,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invariant violated: {0}")]
    Invariant(String),
}
