use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}:{line}: score {score} outside declared scale [{min}, {max}]")]
    OutOfScale {
        path: PathBuf,
        line: usize,
        score: f64,
        min: f64,
        max: f64,
    },

    #[error("unsupported file version: {0}")]
    Version(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("unknown item id `{0}`")]
    UnknownItem(String),

    #[error("not enough {class}: need {needed}, have {available}")]
    InsufficientClass {
        class: &'static str,
        needed: usize,
        available: usize,
    },

    #[error("training diverged in epoch {epoch}: parameters became non-finite; try a smaller learning rate")]
    Diverged { epoch: usize },

    #[error("solver did not converge after {iterations} iterations (KKT violation {violation:e})")]
    NotConverged { iterations: usize, violation: f64 },

    #[error("training data needs both classes, got only {0}")]
    SingleClass(&'static str),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("no prediction for {} item(s): {}", .0.len(), .0.join(", "))]
    CoverageGap(Vec<String>),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
