use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure classes, used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments or an operation used outside its contract.
    Usage,
    /// Malformed or inconsistent input data.
    Data,
    /// Non-finite values or an undefined numeric quantity.
    Numeric,
    /// A structural invariant of an internal type was violated.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("node id {id} out of bounds for graph with {num_nodes} nodes")]
    Bounds { id: usize, num_nodes: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("objective undefined: {0}")]
    UndefinedObjective(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("hierarchy invariant violated: {0}")]
    Hierarchy(String),

    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Argument(_) | Error::Usage(_) => ErrorKind::Usage,
            Error::Parse { .. }
            | Error::Bounds { .. }
            | Error::Shape(_)
            | Error::Data(_)
            | Error::Sampling(_)
            | Error::Checkpoint(_)
            | Error::Io { .. } => ErrorKind::Data,
            Error::Numeric(_) | Error::UndefinedObjective(_) | Error::UndefinedMetric(_) => {
                ErrorKind::Numeric
            }
            Error::Index(_) | Error::Hierarchy(_) | Error::TapeConsumed => ErrorKind::Internal,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
