use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed report at byte offset {offset}: {message}")]
    ReportSyntax { offset: usize, message: String },

    #[error("report record {index}: {message}")]
    ReportRecord { index: usize, message: String },

    #[error("diff parse error at line {line}: {message}")]
    DiffSyntax { line: usize, message: String },

    #[error("corpus integrity: {0}")]
    Integrity(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training refused: {0}")]
    Training(String),

    #[error("model file: {0}")]
    Model(String),

    #[error("version control command failed: {0}")]
    Vcs(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
