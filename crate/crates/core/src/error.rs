use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("not found: {0}")]
    NotFound(PathBuf),

    #[error("schema error: missing column `{column}`")]
    Schema { column: String },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("invalid UTF-8 at byte offset {offset}")]
    Decode { offset: usize },

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("vocabulary error: {0}")]
    Vocabulary(String),

    #[error("capacity error: sequence length {len} exceeds max_position {max}")]
    Capacity { len: usize, max: usize },

    #[error("numeric error: non-finite value in {context}")]
    Numeric { context: String },

    #[error("load error for parameter `{param}`: {message}")]
    Load { param: String, message: String },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn numeric(context: impl Into<String>) -> Self {
        Error::Numeric { context: context.into() }
    }

    /// Stable snake_case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::NotFound(_) => "not_found",
            Error::Schema { .. } => "schema",
            Error::Parse { .. } => "parse",
            Error::Decode { .. } => "decode",
            Error::Stratification(_) => "stratification",
            Error::Config(_) => "config",
            Error::Vocabulary(_) => "vocabulary",
            Error::Capacity { .. } => "capacity",
            Error::Numeric { .. } => "numeric",
            Error::Load { .. } => "load",
            Error::Contract(_) => "contract",
            Error::Training(_) => "training",
            Error::Json(_) => "json",
        }
    }

    /// True for errors caused by the caller's configuration or inputs rather
    /// than by the runtime (IO, numerics).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Schema { .. } | Error::Contract(_) | Error::Stratification(_)
        )
    }
}
