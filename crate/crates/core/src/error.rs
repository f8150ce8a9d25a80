use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("malformed distance table: {0}")]
    MalformedTable(String),
    #[error("not a metric: {0}")]
    NotAMetric(String),
    #[error("unknown point {0:?}")]
    UnknownPoint(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid norm: {0}")]
    InvalidNorm(String),
    #[error("comparison undecided: {0}")]
    Undecided(String),
    #[error("resolution limit exceeded: {0}")]
    Resolution(String),
    #[error("infeasible budget: minimal achievable epsilon is {minimal_epsilon}")]
    InfeasibleBudget { minimal_epsilon: String },
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
