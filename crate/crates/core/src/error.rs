use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (bound {bound})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        bound: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid belief: {0}")]
    InvalidBelief(String),

    /// The observation has zero probability under the predicted belief.
    #[error("observation {observation} is impossible after action {action}")]
    ImpossibleObservation { action: usize, observation: usize },

    /// No state supported by the belief is consistent with the suggestion likelihood.
    #[error("suggestion likelihood has zero mass on the belief support")]
    ImpossibleSuggestion,

    #[error("policy parse error at line {line}, column {column}: {message}")]
    PolicyParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("policy format error: {0}")]
    PolicyFormat(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors a CLI should report as configuration problems.
    pub fn is_config(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Csv(_))
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, bound: usize) -> Result<()> {
    if index < bound {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, bound })
    }
}
