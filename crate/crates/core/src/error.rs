use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("validation error for record {id}: {message}")]
    Validation { id: String, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid example: {0}")]
    InvalidExample(String),

    #[error("training error at epoch {epoch}, batch {batch}: {message}")]
    Training {
        epoch: usize,
        batch: usize,
        message: String,
    },

    #[error("unknown id: {0}")]
    Lookup(String),

    #[error("clustering conflict between {members:?}: {message}")]
    Clustering {
        members: Vec<String>,
        message: String,
    },

    #[error("taxonomy cycle: {}", path.join(" -> "))]
    Cycle { path: Vec<String> },

    #[error("ingestion error in record {record}: unresolved concepts {concepts:?}")]
    Ingestion {
        record: String,
        concepts: Vec<String>,
    },

    #[error("path error at step {step}: {message}")]
    Path { step: usize, message: String },

    #[error("mapping error: {0}")]
    Mapping(String),

    #[error("query error: {0}")]
    Query(String),

    #[error("session error: {0}")]
    Session(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("inference error: {0}")]
    Inference(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable kind, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Validation { .. } => "validation",
            Error::Data(_) => "data",
            Error::InvalidExample(_) => "invalid_example",
            Error::Training { .. } => "training",
            Error::Lookup(_) => "lookup",
            Error::Clustering { .. } => "clustering",
            Error::Cycle { .. } => "cycle",
            Error::Ingestion { .. } => "ingestion",
            Error::Path { .. } => "path",
            Error::Mapping(_) => "mapping",
            Error::Query(_) => "query",
            Error::Session(_) => "session",
            Error::Protocol(_) => "protocol",
            Error::Inference(_) => "inference",
            Error::Format(_) => "format",
            Error::Io { .. } => "io",
        }
    }
}
