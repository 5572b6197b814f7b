use std::path::PathBuf;

/// Errors raised anywhere in the inversion pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("star-shaped source rejected: radius {radius} at angle {theta} outside [{min}, {max}]")]
    ShapeRejected {
        theta: f64,
        radius: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("solver diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("sensor index {index} out of range for {n_theta} angular nodes")]
    SensorOutOfRange { index: usize, n_theta: usize },

    #[error("insufficient samples: need {needed}, have {have}")]
    InsufficientSamples { needed: usize, have: usize },

    #[error("chain aborted at iteration {iteration}: {source}")]
    ChainAborted {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("round {round} failed: {source}")]
    RoundFailed {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
