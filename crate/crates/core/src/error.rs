use std::path::PathBuf;

use crate::model::ActivitySet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("structural deadlock: activities {blocked:?} can never claim their resources")]
    Deadlock { blocked: Vec<usize> },

    #[error("simulation with seed {seed} failed: {source}")]
    Seeded {
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("under-sampled HMM: no outgoing transitions observed for states {states:?}; enlarge the ensemble")]
    UnderSampled { states: Vec<ActivitySet> },

    #[error("no viable hidden path: observation at position {position} is impossible under the model")]
    NoViablePath { position: usize },

    #[error("forecast unavailable: {0}")]
    ForecastUnavailable(#[source] Box<Error>),

    #[error("undefined variance: need at least 2 samples, got {0}")]
    UndefinedVariance(usize),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips seed and forecast wrappers down to the originating failure.
    pub fn root(&self) -> &Error {
        match self {
            Error::Seeded { source, .. } | Error::ForecastUnavailable(source) => source.root(),
            other => other,
        }
    }
}
