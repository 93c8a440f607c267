use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid grid: {0}")]
    Grid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value produced at time step {step} ({which})")]
    Instability { step: usize, which: &'static str },

    #[error("invalid filter parameter: {0}")]
    Filter(String),

    #[error("malformed archive: {0}")]
    Archive(String),

    #[error("malformed image: {0}")]
    Image(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
