//! Error classes and their exit codes.

use std::fmt;

use lyrmel::Error;

pub const INTERNAL: u8 = 1;
pub const CONFIG: u8 = 3;
pub const IO: u8 = 4;
pub const MALFORMED: u8 = 5;
pub const EMPTY: u8 = 6;
pub const NO_LEXICON: u8 = 7;
pub const INCONSISTENT: u8 = 8;

/// An error that carries its own exit code.
#[derive(Debug)]
pub struct Classified {
    pub code: u8,
    pub msg: String,
}

impl fmt::Display for Classified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.msg)
    }
}

impl std::error::Error for Classified {}

pub fn config(msg: impl Into<String>) -> anyhow::Error {
    Classified { code: CONFIG, msg: msg.into() }.into()
}

pub fn empty(msg: impl Into<String>) -> anyhow::Error {
    Classified { code: EMPTY, msg: msg.into() }.into()
}

pub fn malformed(msg: impl Into<String>) -> anyhow::Error {
    Classified { code: MALFORMED, msg: msg.into() }.into()
}

pub fn io(msg: impl Into<String>) -> anyhow::Error {
    Classified { code: IO, msg: msg.into() }.into()
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => IO,
        Error::Midi { .. } | Error::Decode { .. } | Error::Format { .. } | Error::Json(_) | Error::Lookup(_) => MALFORMED,
        Error::EmptyLexicon => EMPTY,
        Error::MissingLexicon => NO_LEXICON,
        Error::InvalidInput(_) | Error::Capacity { .. } | Error::InvalidMask(_) => INCONSISTENT,
    }
}

/// Exit code for the first classifiable error in the chain.
pub fn code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Classified>() {
            return c.code;
        }
        if let Some(e) = cause.downcast_ref::<Error>() {
            return core_code(e);
        }
        if cause.is::<std::io::Error>() {
            return IO;
        }
        if cause.is::<serde_json::Error>() {
            return MALFORMED;
        }
    }
    INTERNAL
}
