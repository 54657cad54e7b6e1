//! Lyric and melody features: syllable stress, melodic peaks and the
//! rhythm skeleton.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::{Note, TICKS_PER_BAR};

/// Stress level of one syllable, in dictionary digit order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Stress {
    Unstressed = 0,
    Primary = 1,
    Secondary = 2,
}

impl Stress {
    pub fn from_digit(d: u8) -> Option<Stress> {
        match d {
            0 => Some(Stress::Unstressed),
            1 => Some(Stress::Primary),
            2 => Some(Stress::Secondary),
            _ => None,
        }
    }

    pub fn level(self) -> u8 {
        self as u8
    }
}

/// Per-syllable stress levels of one word.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StressVector(pub Vec<Stress>);

impl StressVector {
    pub fn levels(&self) -> Vec<u8> {
        self.0.iter().map(|s| s.level()).collect()
    }
}

/// A pronouncing dictionary in the CMU text format.
///
/// Lines look like `WATERMELON  W AO1 T ER0 M EH2 L AH0 N`; `;;;` starts a
/// comment and alternate pronunciations (`WORD(1)`) are skipped so that the
/// first listed entry wins.
#[derive(Debug, Clone, Default)]
pub struct PronouncingDictionary {
    entries: HashMap<String, Vec<String>>,
}

impl PronouncingDictionary {
    pub fn parse<R: BufRead>(input: R) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with(";;;") {
                continue;
            }
            let mut parts = line.split_whitespace();
            let head = parts.next().unwrap();
            let phones: Vec<String> = parts.map(str::to_string).collect();
            if phones.is_empty() {
                return Err(Error::Format {
                    what: "dictionary",
                    line: i + 1,
                    msg: format!("entry {head:?} has no phonemes"),
                });
            }
            if head.ends_with(')') && head.contains('(') {
                continue;
            }
            entries.entry(head.to_lowercase()).or_insert(phones);
        }
        Ok(PronouncingDictionary { entries })
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn phonemes(&self, word: &str) -> Option<&[String]> {
        self.entries.get(word).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Stress digits of the word's vowel phonemes, in order.
pub fn syllable_stress(word: &str, dict: &PronouncingDictionary) -> Result<StressVector> {
    let phones = dict
        .phonemes(&word.to_lowercase())
        .ok_or_else(|| Error::Lookup(word.to_string()))?;
    Ok(StressVector(
        phones
            .iter()
            .filter_map(|p| {
                p.bytes()
                    .last()
                    .filter(u8::is_ascii_digit)
                    .and_then(|d| Stress::from_digit(d - b'0'))
            })
            .collect(),
    ))
}

/// Per-note binary flags for one feature family.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoteFeatureVector(pub Vec<bool>);

impl NoteFeatureVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }
}

/// A note is a peak when it is strictly higher than both neighbours;
/// the first and last notes never are.
pub fn melodic_peaks(pitches: &[u8]) -> NoteFeatureVector {
    let n = pitches.len();
    NoteFeatureVector(
        (0..n)
            .map(|i| i > 0 && i + 1 < n && pitches[i] > pitches[i - 1] && pitches[i] > pitches[i + 1])
            .collect(),
    )
}

const STRONG_BEAT: u32 = TICKS_PER_BAR / 2;
const BEAT: u32 = TICKS_PER_BAR / 4;

/// Why a note belongs to the rhythm skeleton.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Accent {
    /// Onset on beat 1 or beat 3.
    Metrical,
    /// A metrical accent that is also longer than both neighbours.
    AgogicMetrical,
    /// Off-beat onset, sounding across the next strong beat, longer than both neighbours.
    AgogicSyncopation,
}

fn longer_than_neighbours(notes: &[Note], i: usize) -> bool {
    let d = notes[i].duration;
    let before = i == 0 || d > notes[i - 1].duration;
    let after = i + 1 == notes.len() || d > notes[i + 1].duration;
    before && after
}

/// Accent class of every note, `None` for notes outside the skeleton.
pub fn classify_accents(notes: &[Note]) -> Vec<Option<Accent>> {
    (0..notes.len())
        .map(|i| {
            let note = &notes[i];
            let pos = note.position as u32;
            if pos.is_multiple_of(STRONG_BEAT) {
                return Some(if longer_than_neighbours(notes, i) {
                    Accent::AgogicMetrical
                } else {
                    Accent::Metrical
                });
            }
            let on_beat = pos.is_multiple_of(BEAT);
            let onset = note.onset();
            let next_strong = (onset / STRONG_BEAT + 1) * STRONG_BEAT;
            if !on_beat && note.end() > next_strong && longer_than_neighbours(notes, i) {
                Some(Accent::AgogicSyncopation)
            } else {
                None
            }
        })
        .collect()
}

pub fn rhythm_skeleton(notes: &[Note]) -> NoteFeatureVector {
    NoteFeatureVector(classify_accents(notes).iter().map(Option::is_some).collect())
}
