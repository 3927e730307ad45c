use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid arrival rates: {0}")]
    InvalidRates(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The instance exceeds a size limit of an exact (exponential-time) routine.
    #[error("instance too large for {what}: {size} exceeds limit {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("bounded-burst trace violates the burst constraint at node {node}, slots {from}..={to}: {arrived} arrivals > rate*{span} + {burst}")]
    BurstViolation {
        node: usize,
        from: u64,
        to: u64,
        arrived: u64,
        span: u64,
        burst: f64,
    },

    #[error("chain is not ergodic: {0}")]
    NotErgodic(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("transition constructions disagree: max entry difference {0:e}")]
    ConstructionMismatch(f64),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
