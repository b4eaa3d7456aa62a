use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{file}:{line}: field `{field}`: {message}")]
    Parse {
        file: PathBuf,
        line: u64,
        field: String,
        message: String,
    },

    #[error("producer `{producer}` has no production for year {year}")]
    MissingYear { producer: String, year: i32 },

    #[error("invalid scenario: {0}")]
    Scenario(String),

    #[error("{0}")]
    Numeric(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Validation failures (bad inputs, config or scenario) as opposed to
    /// I/O trouble while running.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_) | Error::Input(_) | Error::Parse { .. } | Error::Scenario(_) | Error::Toml { .. } => true,
            Error::Csv { source, .. } => !source.is_io_error(),
            Error::MissingYear { .. } | Error::Numeric(_) | Error::Io { .. } => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
