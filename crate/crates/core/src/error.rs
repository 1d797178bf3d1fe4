use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate circular mean: resultant length {0:e} below threshold")]
    DegenerateMean(f64),

    #[error("empty history")]
    EmptyHistory,

    #[error("insufficient data: {got} observations, need at least {need}")]
    InsufficientData { got: usize, need: usize },

    #[error("invalid covariance: {0}")]
    InvalidCovariance(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(&'static str),

    #[error("no evaluation cases")]
    NoCases,

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("missing region configuration: {0}")]
    MissingRegions(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("map format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
