use funcgnn_numcore::NumError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("corpus is empty")]
    CorpusEmpty,
    #[error("{field}: term `{term}` collides with a reserved term")]
    ReservedTermConflict { field: &'static str, term: String },
    #[error("{field}: empty term")]
    EmptyTerm { field: &'static str },
    #[error("{field}: unknown term `{term}`")]
    UnknownTerm { field: &'static str, term: String },
    #[error("graph `{graph}`: edge {src} -> {dst} references a missing node")]
    DanglingEdge { graph: String, src: u64, dst: u64 },
    #[error("graph `{graph}`: {reason}")]
    InvalidGraph { graph: String, reason: String },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: unknown flow qualifier `{value}`")]
    Qualifier { line: u64, value: String },
    #[error("system `{0}` rejected: no data point carries a tier-1 function")]
    SystemRejected(String),
    #[error("split: {0}")]
    Split(String),
    #[error("labels: {0}")]
    Label(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("run diverged at epoch {epoch}: {reason}")]
    Diverged { epoch: usize, reason: String },
    #[error("vocabulary hash mismatch: checkpoint {expected}, data {found}")]
    VocabHash { expected: String, found: String },
    #[error("shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
