use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate concept id `{0}`")]
    DuplicateConcept(String),

    #[error("concept `{0}` has an empty synonym list")]
    EmptySynonyms(String),

    #[error("unknown concept id `{0}`")]
    UnknownConcept(String),

    #[error("unknown semantic group `{0}`")]
    UnknownGroup(String),

    #[error("cannot fit a model on an empty corpus")]
    EmptyCorpus,

    #[error("invalid span {start}..{end} for text of {len} chars")]
    SpanOutOfRange { start: usize, end: usize, len: usize },

    #[error("span {start}..{end} covers no text")]
    EmptySpan { start: usize, end: usize },

    #[error("{0} list must not be empty")]
    EmptyInput(&'static str),

    #[error("fraction {0} is outside [0, 1]")]
    FractionOutOfRange(f64),

    #[error("tokenizer does not round-trip {} synonym(s): {}", .0.len(), .0.join(", "))]
    TokenizerRoundTrip(Vec<String>),

    #[error("synonym `{0}` encodes to zero tokens")]
    EmptyEncoding(String),

    #[error("prefix is not a path in the trie")]
    BadPrefix,

    #[error("token path does not end at a terminal")]
    NotTerminal,

    #[error("trie has no synonyms")]
    EmptyTrie,

    #[error("decoding exceeded the step limit of {0}")]
    StepLimit(usize),

    #[error("tokenizer fingerprint mismatch: file has {found}, expected {expected}")]
    FingerprintMismatch { expected: String, found: String },

    #[error("invalid trie file: {0}")]
    TrieFormat(String),

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("requested {requested} exemplars but only {available} are available")]
    NotEnoughExemplars { requested: usize, available: usize },

    #[error("template error: {0}")]
    Template(String),

    #[error("expected exactly {expected} exemplars, got {found}")]
    ExemplarCount { expected: usize, found: usize },

    #[error("judge case `{0}` compares a concept with itself")]
    SelfComparison(String),

    #[error("case ids differ between verdict sets: {0}")]
    CaseMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("representation backend `{0}` is not available")]
    Unsupported(&'static str),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
