use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("target column not found: {0}")]
    MissingTarget(String),
    #[error("ragged row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table has no data rows")]
    EmptyTable,
    #[error("table has no feature columns")]
    NoColumns,
    #[error("duplicate column name: {0}")]
    DuplicateColumn(String),
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("malformed model document: {0}")]
    Model(#[from] serde_json::Error),
    #[error("unsupported model document version {found} (expected {expected})")]
    ModelVersion { found: String, expected: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than by the program
    /// configuration or the runtime environment.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Csv(_)
                | Error::MissingTarget(_)
                | Error::RaggedRow { .. }
                | Error::EmptyTable
                | Error::NoColumns
                | Error::DuplicateColumn(_)
                | Error::InvalidTarget(_)
                | Error::SchemaMismatch(_)
                | Error::Model(_)
                | Error::ModelVersion { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
