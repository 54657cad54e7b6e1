//! Lyric-melody corpus toolkit.
//!
//! Songs are ingested from MIDI files with lyric events, aligned word by
//! word, segmented into phrases and encoded as compound tokens. On top of
//! the corpus sit a harmonized n-gram lexicon, blank-infilling sample
//! construction and melody similarity metrics.

pub mod config;
pub mod corpus;
pub mod error;
pub mod features;
pub mod ingestion;
pub mod metrics;
pub mod ngram;
pub mod phrase;
pub mod pretraining;
pub mod representation;
pub mod synthetic;

pub use corpus::CorpusSong;
pub use error::{Error, Result};
pub use features::{PronouncingDictionary, Stress, StressVector};
pub use representation::{AlignedSong, AlignmentIds, Note, SpecialKind, TempoClass, Token, Word};
