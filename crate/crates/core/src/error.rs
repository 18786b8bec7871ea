use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fractional order beta = {beta} outside [0, {upper})")]
    BetaOutOfRange { beta: f64, upper: f64 },

    #[error("direction toward the ball center is undefined for s = 0 in dimension {d}")]
    UndefinedDirection { d: usize },

    #[error("evaluation point t = {t} outside table coverage: {reason}")]
    OutOfCoverage { t: f64, reason: String },

    #[error("dimension mismatch: expected d = {expected}, got d = {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("beta mismatch: {left} vs {right}")]
    BetaMismatch { left: f64, right: f64 },

    #[error(
        "sequence generator produced non-decreasing W^1,1 distances at j = {j}: {prev} -> {next}"
    )]
    NonDecreasingSequence { j: usize, prev: f64, next: f64 },

    #[error("{0}")]
    Refused(String),

    #[error("malformed table cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
