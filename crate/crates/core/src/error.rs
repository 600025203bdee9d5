use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain of a function (e.g. ordinal of zero).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: field `{field}`: {message}")]
    Row {
        row: String,
        field: String,
        message: String,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("backend `{id}` failed: {message}")]
    Backend { id: String, message: String },

    #[error("backend `{id}` sent a malformed reply: {message}")]
    Protocol { id: String, message: String },

    #[error("ensemble failed: backends {failed:?} returned errors")]
    Ensemble { failed: Vec<String>, causes: Vec<String> },

    #[error("record `{id}`: {source}")]
    Record {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn row(row: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Row {
            row: row.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    /// I/O error whose message names the file involved.
    pub fn io_at(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    }

    /// True for errors caused by bad input data or configuration, as opposed
    /// to backend, numerical or I/O failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Domain(_)
            | Error::Config(_)
            | Error::Validation(_)
            | Error::MissingColumn(_)
            | Error::Row { .. } => true,
            Error::Record { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
