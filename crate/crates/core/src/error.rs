use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("capacity exceeded: {what} has {got}, limit is {limit}")]
    Capacity {
        what: &'static str,
        got: usize,
        limit: usize,
    },
    #[error("malformed MIDI at byte {offset}: {msg}")]
    Midi { offset: usize, msg: String },
    #[error("malformed token sequence at token {index}: {msg}")]
    Decode { index: usize, msg: String },
    #[error("word not in pronouncing dictionary: {0:?}")]
    Lookup(String),
    #[error("no n-gram candidates; lexicon would be empty")]
    EmptyLexicon,
    #[error("word-level objectives need a non-empty lexicon")]
    MissingLexicon,
    #[error("attention mask row {0} forbids every column")]
    InvalidMask(usize),
    #[error("malformed {what} file at line {line}: {msg}")]
    Format {
        what: &'static str,
        line: usize,
        msg: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
