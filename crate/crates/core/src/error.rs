use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular field: evaluation point coincides with its source ({what})")]
    Singular { what: String },

    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    #[error("divergent moment of order m = {m}: {reason}")]
    Divergent { m: f64, reason: String },

    #[error("rejection sampling acceptance rate {rate:.3e} is below 1e-4; check the envelope")]
    Acceptance { rate: f64 },

    #[error(
        "particle {index} came within {distance:.3e} of the charge at t = {t}; \
         use a smaller dt or a larger hole radius"
    )]
    CloseEncounter { index: usize, distance: f64, t: f64 },

    #[error("{count} particle(s) lie outside the grid")]
    OutsideGrid { count: usize },

    #[error("matrix inversion failed: {0}")]
    Inversion(String),

    #[error("empty admissible interval: {0}")]
    EmptyInterval(String),

    #[error("config error at `{path}`: {reason}")]
    Config { path: String, reason: String },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("bad time series: {0}")]
    Series(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter { name, reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
