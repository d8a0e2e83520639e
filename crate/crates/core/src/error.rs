use std::path::PathBuf;

use thiserror::Error;

use crate::config::ConfigViolation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {}", join_violations(.0))]
    InvalidConfig(Vec<ConfigViolation>),

    #[error("unsupported access method: {0}")]
    UnsupportedMethod(String),

    #[error("invalid placement: {0}")]
    InvalidPlacement(String),

    #[error("invalid PLR curve: {0}")]
    InvalidCurve(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("{path}:{line}: {message}")]
    Scenario {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn join_violations(v: &[ConfigViolation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
