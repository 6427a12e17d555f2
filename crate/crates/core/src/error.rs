use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse error category, used by the CLI to choose an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Stage,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("pair references judgment {pair} but was validated against {judgment}")]
    IdentityMismatch { pair: String, judgment: String },

    #[error("cannot segment judgment {judgment_id}: {reason}")]
    UnparseableJudgment { judgment_id: String, reason: String },

    #[error("malformed outline for guide {guide_id}: {reason}")]
    MalformedOutline { guide_id: String, reason: String },

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionError { expected: usize, actual: usize },

    #[error("duplicate score for {query_id}/{judgment_id}/{para_num} at line {line}")]
    DuplicateScore {
        query_id: String,
        judgment_id: String,
        para_num: u32,
        line: usize,
    },

    #[error("invalid score {value:?} at line {line}")]
    InvalidScore { value: String, line: usize },

    #[error("scores missing for paragraphs {missing:?} of judgment {judgment_id}")]
    IncompleteScores {
        judgment_id: String,
        missing: Vec<u32>,
    },

    #[error("recall is undefined for pair {0}: empty relevant set")]
    UndefinedMetric(String),

    #[error("no ranking for pair {0}")]
    MissingRanking(String),

    #[error("unknown judgment {0}")]
    UnknownJudgment(String),

    #[error("embedding store: {0}")]
    Embedding(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_) => ErrorKind::Config,
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                ErrorKind::Config
            }
            Error::Io { .. } => ErrorKind::Stage,
            Error::Stage { source, .. } => match source.kind() {
                ErrorKind::Data => ErrorKind::Data,
                _ => ErrorKind::Stage,
            },
            _ => ErrorKind::Data,
        }
    }
}
