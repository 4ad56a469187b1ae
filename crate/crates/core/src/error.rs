use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("trace does not belong to the current network parameters")]
    StaleTrace,

    #[error("non-finite gradient in layer {layer}")]
    NonFiniteGradient { layer: usize },

    #[error(
        "{stage} training diverged at epoch {epoch}: loss={loss}, gamma0={gamma0}, gamma1={gamma1}"
    )]
    Diverged {
        stage: &'static str,
        epoch: usize,
        loss: f64,
        gamma0: f64,
        gamma1: f64,
    },

    #[error("enumeration of {levels}^{sensors} vectors exceeds the 2^24 limit")]
    EnumerationTooLarge { levels: usize, sensors: usize },

    #[error("unreachable fusion input k={k} of K={total}: both joint probabilities are zero")]
    Unreachable { k: usize, total: usize },

    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
