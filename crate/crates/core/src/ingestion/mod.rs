//! MIDI ingestion: parsing, lyric and melody cleaning, alignment,
//! phrase assignment and de-duplication.

pub mod align;
pub mod dedup;
pub mod lyrics;
pub mod melody;
pub mod midi;

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::CorpusSong;
use crate::features::PronouncingDictionary;
use crate::phrase::{segment_song, PhraseConfig};
use crate::representation::AlignedSong;

pub use align::align_lyrics_melody;
pub use dedup::dedup_corpus;
pub use lyrics::{process_lyrics, LyricRules, LyricWord};
pub use melody::{process_melody, Melody, MelodyRules};
pub use midi::{parse_midi, write_midi, RawSong, WriteOptions};

/// Machine-readable reason a song was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    Parse,
    NoLyrics,
    NoNotes,
    NonFourFour,
    TempoChange,
    MinBars,
    LyricRepetition,
    LongShortWords,
    DictionaryMiss,
    DegenerateAlignment,
    Capacity,
    Duplicate,
}

impl RejectReason {
    pub const ALL: [RejectReason; 12] = [
        RejectReason::Parse,
        RejectReason::NoLyrics,
        RejectReason::NoNotes,
        RejectReason::NonFourFour,
        RejectReason::TempoChange,
        RejectReason::MinBars,
        RejectReason::LyricRepetition,
        RejectReason::LongShortWords,
        RejectReason::DictionaryMiss,
        RejectReason::DegenerateAlignment,
        RejectReason::Capacity,
        RejectReason::Duplicate,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Parse => "parse",
            RejectReason::NoLyrics => "no-lyrics",
            RejectReason::NoNotes => "no-notes",
            RejectReason::NonFourFour => "non-four-four",
            RejectReason::TempoChange => "tempo-change",
            RejectReason::MinBars => "min-bars",
            RejectReason::LyricRepetition => "lyric-repetition",
            RejectReason::LongShortWords => "long-short-words",
            RejectReason::DictionaryMiss => "dictionary-miss",
            RejectReason::DegenerateAlignment => "degenerate-alignment",
            RejectReason::Capacity => "capacity",
            RejectReason::Duplicate => "duplicate",
        }
    }
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub reason: RejectReason,
    pub detail: String,
}

impl Rejection {
    pub fn new(reason: RejectReason, detail: impl Into<String>) -> Self {
        Rejection { reason, detail: detail.into() }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.reason, self.detail)
    }
}

impl std::error::Error for Rejection {}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub lyrics: LyricRules,
    pub melody: MelodyRules,
    pub phrase: PhraseConfig,
}

/// Per-rule rejection counts for one ingestion run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub input: usize,
    pub retained: usize,
    pub rejected: BTreeMap<RejectReason, usize>,
}

impl PipelineReport {
    pub fn rejected_total(&self) -> usize {
        self.rejected.values().sum()
    }

    pub fn reconciles(&self) -> bool {
        self.retained + self.rejected_total() == self.input
    }

    fn reject(&mut self, reason: RejectReason) {
        *self.rejected.entry(reason).or_default() += 1;
    }

    pub fn render(&self) -> String {
        let mut out = format!("input\t{}\nretained\t{}\n", self.input, self.retained);
        for reason in RejectReason::ALL {
            let n = self.rejected.get(&reason).copied().unwrap_or(0);
            out.push_str(&format!("rejected.{}\t{n}\n", reason.code()));
        }
        out
    }
}

/// Runs every per-song phase on one MIDI file.
pub fn ingest_song(bytes: &[u8], dict: &PronouncingDictionary, cfg: &IngestConfig) -> Result<(AlignedSong, f64), Rejection> {
    let raw = parse_midi(bytes).map_err(|e| Rejection::new(RejectReason::Parse, e.to_string()))?;
    for w in &raw.warnings {
        log::debug!("midi: {w}");
    }
    let words = process_lyrics(&raw, dict, &cfg.lyrics)?;
    let melody = process_melody(&raw, &cfg.melody)?;
    let words: Vec<LyricWord> = words
        .into_iter()
        .map(|w| LyricWord { tick: melody.map_tick(w.tick), ..w })
        .collect();
    let song = align_lyrics_melody(&words, &melody.notes)?;
    if song.bar_count() < cfg.melody.min_bars {
        return Err(Rejection::new(
            RejectReason::MinBars,
            format!("{} bars after alignment < {}", song.bar_count(), cfg.melody.min_bars),
        ));
    }
    let (song, _) = segment_song(&song, &cfg.phrase).map_err(|e| Rejection::new(RejectReason::Capacity, e.to_string()))?;
    Ok((song, melody.bpm))
}

/// Outcome of ingesting a batch of named files.
#[derive(Debug, Clone, Default)]
pub struct IngestOutcome {
    pub songs: Vec<CorpusSong>,
    pub report: PipelineReport,
    /// `(id, rejection)` in input order.
    pub rejections: Vec<(String, Rejection)>,
}

/// Ingests `(id, bytes)` inputs in parallel; results keep input order and
/// duplicates after the first are rejected.
pub fn ingest_corpus(inputs: &[(String, Vec<u8>)], dict: &PronouncingDictionary, cfg: &IngestConfig) -> IngestOutcome {
    let results: Vec<Result<(AlignedSong, f64), Rejection>> =
        inputs.par_iter().map(|(_, bytes)| ingest_song(bytes, dict, cfg)).collect();
    let mut out = IngestOutcome {
        report: PipelineReport { input: inputs.len(), ..Default::default() },
        ..Default::default()
    };
    let mut seen = std::collections::HashSet::new();
    for ((id, _), result) in inputs.iter().zip(results) {
        let rejection = match result {
            Ok((song, bpm)) => {
                if seen.insert(dedup::song_key(&song)) {
                    out.songs.push(CorpusSong { id: id.clone(), bpm, song });
                    out.report.retained += 1;
                    continue;
                }
                Rejection::new(RejectReason::Duplicate, "same notes and lyrics as an earlier song")
            }
            Err(r) => r,
        };
        out.report.reject(rejection.reason);
        out.rejections.push((id.clone(), rejection));
    }
    out
}
