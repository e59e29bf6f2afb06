use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("no active samples")]
    NoActiveSamples,

    #[error("inactive sample")]
    InactiveSample,

    #[error("insufficient columns: need at least {needed}, got {got}")]
    InsufficientColumns { needed: usize, got: usize },

    #[error("degenerate pair: columns {first} and {second} have equal ratios")]
    DegeneratePair { first: usize, second: usize },

    #[error("degenerate signal: zero variance")]
    DegenerateSignal,

    #[error("sample {sample}: {source}")]
    AtSample {
        sample: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
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

    pub(crate) fn at_sample(self, sample: usize) -> Self {
        Error::AtSample {
            sample,
            source: Box::new(self),
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Innermost error with sample/stage context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtSample { source, .. } | Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
