use thiserror::Error;

/// Errors surfaced by the triage library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("column map does not cover required field `{0}`")]
    MissingColumn(String),

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("vocabulary is empty after document-frequency filtering")]
    EmptyVocabulary,

    #[error("no developers available in model")]
    NoDevelopers,

    #[error("embedding file is missing a vector for document `{0}`")]
    MissingEmbedding(String),

    #[error("embedding for document `{id}` has {got} dimensions, expected {expected}")]
    EmbeddingDimension {
        id: String,
        got: usize,
        expected: usize,
    },

    #[error("metric is undefined on an empty record set")]
    UndefinedMetric,

    #[error("evaluation set is empty")]
    EmptyEvaluation,

    #[error("time-order violation: train report at {train} is newer than evaluated report {report} at {test}")]
    TimeOrder {
        train: String,
        test: String,
        report: String,
    },

    #[error("model store error: {0}")]
    ModelStore(String),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
