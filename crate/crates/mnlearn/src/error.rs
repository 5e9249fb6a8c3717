use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty slate")]
    EmptySlate,

    #[error("item {item} out of range for {n} items")]
    ItemOutOfRange { item: usize, n: usize },

    #[error("replay budget exhausted on pair ({u}, {v}): the table holds {m} answers per pair; rerun with a larger --m")]
    BudgetExhausted { u: usize, v: usize, m: u128 },

    #[error("replay oracle only answers pair queries, got a slate of size {0}")]
    NonPairQuery(usize),

    #[error("geometric sampling on pair ({u}, {v}) exceeded the iteration cap")]
    GeometricCap { u: usize, v: usize },

    #[error("balanced forest construction failed while relating clusters {j} and {j_m}")]
    BalancedFailure { j: usize, j_m: usize },

    #[error("exact distance refused for n = {n} (cap {cap}); use sampled mode")]
    TooLargeForExact { n: usize, cap: usize },

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub(crate) fn check_open_unit(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x < 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("{name} must lie in (0, 1), got {x}")))
    }
}
