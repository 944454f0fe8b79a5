use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("size error: {0}")]
    Size(String),

    #[error("stencil needs {needed} samples on each side of the junction, got {available}")]
    Stencil { needed: usize, available: usize },

    #[error("junction message mismatch: expected junction {expected}, got {got}")]
    JunctionMismatch { expected: usize, got: usize },

    #[error("timed out waiting for the neighbour message at junction {junction}")]
    ExchangeTimeout { junction: usize },

    #[error("potential evaluated at its singular point {point:?}")]
    Singularity { point: Vec<f64> },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("scheme needs {needed} past operator evaluations, history holds {available}; bootstrap first")]
    BootstrapRequired { needed: usize, available: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },

    #[error("instability detected at step {step} (t = {time}): {reason}")]
    Unstable { step: usize, time: f64, reason: String },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
