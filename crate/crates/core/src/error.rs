use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("{what} has {got} values, expected {expected}")]
    Length {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("{what} must have zero mean, got mean {mean:e}")]
    NonZeroMean { what: &'static str, mean: f64 },

    #[error("density {min:e} at grid index {index} is below the vacuum floor {floor:e}")]
    Vacuum { min: f64, index: usize, floor: f64 },

    #[error("vacuum breach on {fraction:e} of the evaluation set (allowed {allowed:e})")]
    VacuumFraction { fraction: f64, allowed: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("momentum {momentum:e} at index {index} where the density {density:e} vanishes")]
    MomentumOnVacuum {
        index: usize,
        density: f64,
        momentum: f64,
    },

    #[error("time series mismatch: {0}")]
    SeriesMismatch(String),

    #[error("unsupported law: {0}")]
    UnsupportedLaw(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
