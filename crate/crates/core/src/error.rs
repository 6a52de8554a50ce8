use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty corpus: an index needs at least one document")]
    EmptyCorpus,

    #[error("duplicate doc_id {0}")]
    DuplicateDocId(u32),

    #[error("doc_ids are not dense: {count} documents but id {missing} is missing")]
    NonDenseDocIds { count: u32, missing: u32 },

    #[error("document {0} has an empty title")]
    EmptyTitle(u32),

    #[error("index format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("corrupt index file {file}: {reason}")]
    Corrupt { file: String, reason: String },

    #[error("analysis configuration mismatch: {0}")]
    AnalyzerMismatch(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no oracle query for question {question_id} hop {hop}")]
    NoOracle { question_id: String, hop: usize },

    #[error("gold title {title:?} for question {question_id} not found in corpus")]
    GoldNotFound { question_id: String, title: String },

    #[error("malformed serialized context: {0}")]
    MalformedContext(String),

    #[error("reports cover different question sets ({left} vs {right} questions)")]
    QuestionSetMismatch { left: usize, right: usize },

    #[error("wiki dump {path}: {reason}")]
    Dump { path: PathBuf, reason: String },

    #[error("dataset {path}: {reason}")]
    Dataset { path: PathBuf, reason: String },

    #[error("config: {0}")]
    Config(String),

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

    pub(crate) fn corrupt(file: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Corrupt {
            file: file.into(),
            reason: reason.into(),
        }
    }
}
