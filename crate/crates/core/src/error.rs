use thiserror::Error;

/// A violated [`Scenario`](crate::model::Scenario) invariant.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("M must be at least 1")]
    NoNodes,
    #[error("F must be at least 1")]
    EmptyLibrary,
    #[error("K must be at least 1")]
    ZeroCache,
    #[error("K exceeds F")]
    CacheExceedsLibrary,
    #[error("L must be positive")]
    NonPositiveFileSize,
    #[error("positions length mismatch: expected {expected}, got {got}")]
    PositionsLength { expected: usize, got: usize },
    #[error("rates length mismatch: expected {expected}, got {got}")]
    RatesLength { expected: usize, got: usize },
    #[error("rate of node {node} must be positive and finite")]
    NonPositiveRate { node: usize },
    #[error("position of node {node} is not finite")]
    NonFinitePosition { node: usize },
    #[error("distance threshold must be non-negative")]
    NegativeDistanceThreshold,
    #[error("load threshold must be non-negative")]
    NegativeLoadThreshold,
    #[error("zipf skewness must be non-negative")]
    NegativeSkewness,
    #[error("cluster size cap must be at least 2")]
    ClusterCapTooSmall,
    #[error("locality must lie in [0, 1]")]
    LocalityOutOfRange,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    Validation(#[from] ValidationError),
    #[error("node id {id} out of range for {count} nodes")]
    NodeOutOfRange { id: usize, count: usize },
    #[error("a node cannot cooperate with itself ({0})")]
    SelfPair(usize),
    #[error("locality {0} outside [0, 1]")]
    InvalidLocality(f64),
    #[error("invalid popularity model: {0}")]
    Popularity(String),
    #[error("cluster member set is empty")]
    EmptyCluster,
    #[error("cluster size cap {0} is below 2")]
    CapTooSmall(usize),
    #[error("length mismatch: {what} (expected {expected}, got {got})")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("instance size {size} exceeds oracle limit {limit}")]
    OracleLimit { size: u128, limit: u128 },
    #[error("invalid experiment: {0}")]
    Experiment(String),
    #[error("config parse error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input rather than a failing run.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation(_)
                | Error::NodeOutOfRange { .. }
                | Error::SelfPair(_)
                | Error::InvalidLocality(_)
                | Error::Popularity(_)
                | Error::CapTooSmall(_)
                | Error::LengthMismatch { .. }
                | Error::OracleLimit { .. }
                | Error::Experiment(_)
                | Error::Config(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
