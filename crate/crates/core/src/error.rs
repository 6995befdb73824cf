use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("target column `{target}` not found; available columns: {}", available.join(", "))]
    MissingTarget { target: String, available: Vec<String> },

    #[error("single-class target: column `{0}` has only one distinct value")]
    SingleClassTarget(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("class too small to stratify: class `{class}` has {count} instances but {parts} parts are needed")]
    ClassTooSmall {
        class: String,
        count: usize,
        parts: usize,
    },

    #[error("invalid hyper-parameter space: {0}")]
    InvalidSpace(String),

    #[error("combinations belong to different spaces: `{0}` vs `{1}`")]
    MismatchedSpaces(String, String),

    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("model format: {0}")]
    ModelFormat(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("search failed: {0}")]
    Search(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Errors caused by the invocation rather than by the run itself.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::MissingTarget { .. }
                | Error::UnknownAlgorithm(_)
                | Error::Config(_)
                | Error::ModelFormat(_)
                | Error::SchemaMismatch(_)
        )
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
