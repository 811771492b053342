use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("index out of bounds: {what} {index} >= {bound}")]
    Bounds {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("feature {0} was already observed in this session")]
    DuplicateObservation(usize),

    #[error("hypothesis set has no alive members")]
    DegenerateSet,

    #[error("every class assigns zero likelihood to the evidence")]
    DegenerateEvidence,

    #[error("data error: {0}")]
    Data(String),

    #[error("row {row}, column {column}: {message}")]
    Load {
        row: usize,
        column: String,
        message: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, bound: usize) -> Result<()> {
    if index >= bound {
        Err(Error::Bounds { what, index, bound })
    } else {
        Ok(())
    }
}
