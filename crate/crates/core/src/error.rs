use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate profile: all coefficients are zero")]
    DegenerateProfile,
    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("ratio r_{index} = {value} is not an integer")]
    NonIntegerRatio { index: usize, value: f64 },
    #[error("ratio r_{index} = {value} must be at least 2")]
    RatioTooSmall { index: usize, value: u64 },
    #[error("gamma ratio at step {index} is {value}, must exceed 1")]
    GammaRatioTooSmall { index: usize, value: f64 },
    #[error("invalid ladder: {0}")]
    InvalidLadder(String),
    #[error("ladder overflow: R_{index} exceeds exact integer range")]
    LadderOverflow { index: usize },

    #[error("scale range {start}..{end} out of bounds for a field with scales 0..={top}")]
    RangeOutOfBounds { start: usize, end: usize, top: usize },
    #[error("lattice frequency overflow")]
    FrequencyOverflow,

    #[error("{0} has nonzero mean {1:e}")]
    NonzeroMean(&'static str, f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
    #[error("field truncation too small: t = {t} exceeds the last scale threshold {threshold}")]
    TruncationTooSmall { t: f64, threshold: f64 },
    #[error("below first scale: t = {t} does not exceed {threshold}")]
    BelowFirstScale { t: f64, threshold: f64 },
    #[error("no scales: {0}")]
    NoScales(&'static str),

    #[error("non-finite value in path {path_id} at t = {t}")]
    NonFinite { path_id: u64, t: f64 },
    #[error("step refinement did not converge: relative change {change:e} at dt = {dt:e}")]
    RefinementFailed { change: f64, dt: f64 },

    #[error("config: {0}")]
    Config(String),
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("malformed artifact {path}: {reason}")]
    MalformedArtifact { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

pub type Result<T> = std::result::Result<T, Error>;
