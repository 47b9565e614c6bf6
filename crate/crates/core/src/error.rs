use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("row not stochastic at ({s},{a},{b}): sum = {sum}")]
    RowNotStochastic {
        s: usize,
        a: usize,
        b: usize,
        sum: f64,
    },

    #[error("negative transition probability at ({s},{a},{b}) -> {next}: {value}")]
    NegativeProbability {
        s: usize,
        a: usize,
        b: usize,
        next: usize,
        value: f64,
    },

    #[error("reward out of [0,1] at ({s},{a},{b}): {value}")]
    RewardOutOfRange {
        s: usize,
        a: usize,
        b: usize,
        value: f64,
    },

    #[error("discount factor must lie in (0,1), got {0}")]
    InvalidDiscount(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("non-finite entry at ({row},{col})")]
    NonFinite { row: usize, col: usize },

    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("policy pair is not a Nash equilibrium: duality gap {gap} exceeds {limit}")]
    NotNash { gap: f64, limit: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::NotNash { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
