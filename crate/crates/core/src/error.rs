use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid action {action}: environment has {count} actions")]
    InvalidAction { action: usize, count: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("non-finite value encountered in {0}")]
    Numeric(String),

    #[error("map parse error at line {line}, column {column}: {message}")]
    MapParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors that stem from user configuration rather than a failed run.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Config { .. } | Error::MapParse { .. })
    }
}
