//! Joint lyric-melody n-grams, their association scores and the
//! harmonized lexicon built from them.

mod lexicon;
mod sample;
mod score;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{melodic_peaks, rhythm_skeleton, NoteFeatureVector};
use crate::representation::AlignedSong;

pub use lexicon::{
    build_lexicon, build_lexicon_with, corpus_hash, rank_entries, retained_count, score_family, FamilyLexicon, LexiconConfig,
    LexiconEntry, NGramLexicon,
};
pub use sample::{budget_target, max_match_sample, MatchedSpan};
pub use score::{relationship_score, t_statistic, NGramScore, Relationship};

pub const MIN_N: usize = 2;
pub const MAX_N: usize = 12;
/// Separates word segments inside a pattern string.
pub const WORD_SEP: char = '|';

/// Which melodic feature is paired with syllable stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Family {
    /// Stress against melodic peaks.
    Smr,
    /// Stress against the rhythm skeleton.
    Srr,
}

impl Family {
    pub const ALL: [Family; 2] = [Family::Smr, Family::Srr];

    pub fn name(self) -> &'static str {
        match self {
            Family::Smr => "smr",
            Family::Srr => "srr",
        }
    }

    pub fn note_features(self, song: &AlignedSong) -> NoteFeatureVector {
        match self {
            Family::Smr => melodic_peaks(&song.notes.iter().map(|n| n.pitch).collect::<Vec<_>>()),
            Family::Srr => rhythm_skeleton(&song.notes),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "smr" => Ok(Family::Smr),
            "srr" => Ok(Family::Srr),
            _ => Err(Error::invalid(format!("unknown feature family {s:?}"))),
        }
    }
}

/// Per-word pattern segments of one song: stress digits and the note flags
/// of both families, e.g. `"010"` and `"0100"`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SongFeatures {
    pub stress: Vec<String>,
    pub smr: Vec<String>,
    pub srr: Vec<String>,
    /// Half-open note range of every word.
    pub word_notes: Vec<std::ops::Range<usize>>,
}

fn bits(flags: &[bool]) -> String {
    flags.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

impl SongFeatures {
    pub fn new(song: &AlignedSong) -> Self {
        let word_notes = song.word_note_ranges();
        let stress = song
            .words
            .iter()
            .map(|w| w.syllables.iter().map(|s| char::from(b'0' + s.level())).collect())
            .collect();
        let seg = |f: NoteFeatureVector| word_notes.iter().map(|r| bits(&f.0[r.clone()])).collect();
        SongFeatures {
            stress,
            smr: seg(Family::Smr.note_features(song)),
            srr: seg(Family::Srr.note_features(song)),
            word_notes,
        }
    }

    pub fn melodic(&self, family: Family) -> &[String] {
        match family {
            Family::Smr => &self.smr,
            Family::Srr => &self.srr,
        }
    }

    pub fn word_count(&self) -> usize {
        self.stress.len()
    }

    pub fn note_count(&self) -> usize {
        self.word_notes.last().map_or(0, |r| r.end)
    }
}

/// Joins `segments[start..start + n]` with the word separator.
pub fn join_pattern(segments: &[String], start: usize, n: usize) -> String {
    segments[start..start + n].join(&WORD_SEP.to_string())
}

/// Number of words in a pattern.
pub fn pattern_words(pattern: &str) -> usize {
    pattern.matches(WORD_SEP).count() + 1
}

/// Number of notes a melodic pattern covers.
pub fn pattern_notes(pattern: &str) -> usize {
    pattern.len() + 1 - pattern_words(pattern)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JointNGram {
    pub n: usize,
    pub lyric_pattern: String,
    pub melodic_pattern: String,
    pub family: Family,
    pub count: usize,
}

/// Corpus-wide counts for one family.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NGramStats {
    /// `(melodic, lyric)` joint counts.
    pub joint: BTreeMap<(String, String), usize>,
    pub melodic: BTreeMap<String, usize>,
    pub lyric: BTreeMap<String, usize>,
    /// Number of windows of each size; index is `n`.
    pub windows: [usize; MAX_N + 1],
    pub melodic_unigrams: BTreeMap<String, usize>,
    pub lyric_unigrams: BTreeMap<String, usize>,
    pub words: usize,
}

impl NGramStats {
    fn add_song(&mut self, f: &SongFeatures, family: Family) {
        let mel = f.melodic(family);
        let w = f.word_count();
        self.words += w;
        for (m, l) in mel.iter().zip(&f.stress) {
            *self.melodic_unigrams.entry(m.clone()).or_default() += 1;
            *self.lyric_unigrams.entry(l.clone()).or_default() += 1;
        }
        for n in MIN_N..=MAX_N.min(w) {
            self.windows[n] += w + 1 - n;
            for start in 0..=w - n {
                let m = join_pattern(mel, start, n);
                let l = join_pattern(&f.stress, start, n);
                *self.melodic.entry(m.clone()).or_default() += 1;
                *self.lyric.entry(l.clone()).or_default() += 1;
                *self.joint.entry((m, l)).or_default() += 1;
            }
        }
    }

    fn merge(mut self, other: NGramStats) -> NGramStats {
        fn add(into: &mut BTreeMap<String, usize>, from: BTreeMap<String, usize>) {
            for (k, v) in from {
                *into.entry(k).or_default() += v;
            }
        }
        for (k, v) in other.joint {
            *self.joint.entry(k).or_default() += v;
        }
        add(&mut self.melodic, other.melodic);
        add(&mut self.lyric, other.lyric);
        add(&mut self.melodic_unigrams, other.melodic_unigrams);
        add(&mut self.lyric_unigrams, other.lyric_unigrams);
        for n in 0..=MAX_N {
            self.windows[n] += other.windows[n];
        }
        self.words += other.words;
        self
    }

    pub fn collect(features: &[SongFeatures], family: Family) -> NGramStats {
        features
            .par_iter()
            .map(|f| {
                let mut s = NGramStats::default();
                s.add_song(f, family);
                s
            })
            .reduce(NGramStats::default, NGramStats::merge)
    }

    fn unigram_probs(&self, pattern: &str, unigrams: &BTreeMap<String, usize>) -> Vec<f64> {
        pattern
            .split(WORD_SEP)
            .map(|seg| unigrams[seg] as f64 / self.words as f64)
            .collect()
    }

    pub fn melodic_null(&self, pattern: &str) -> Vec<f64> {
        self.unigram_probs(pattern, &self.melodic_unigrams)
    }

    pub fn lyric_null(&self, pattern: &str) -> Vec<f64> {
        self.unigram_probs(pattern, &self.lyric_unigrams)
    }
}

/// All joint n-grams of the corpus with their counts, ordered by
/// melodic pattern then lyric pattern.
pub fn enumerate_joint_ngrams(corpus: &[AlignedSong], family: Family) -> Vec<JointNGram> {
    let features: Vec<SongFeatures> = corpus.par_iter().map(SongFeatures::new).collect();
    NGramStats::collect(&features, family)
        .joint
        .into_iter()
        .map(|((m, l), count)| JointNGram {
            n: pattern_words(&m),
            lyric_pattern: l,
            melodic_pattern: m,
            family,
            count,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Stress;
    use crate::representation::{Note, TempoClass, Word};

    fn song(words: usize) -> AlignedSong {
        let ws = (0..words).map(|_| Word::new("have", vec![Stress::Primary])).collect();
        let notes = (0..words as u32).map(|i| Note::at(i * 480, 60 + (i % 2) as u8 * 4, 480, TempoClass::Andante)).collect();
        AlignedSong::new(ws, notes, (0..words).collect()).unwrap()
    }

    #[test]
    fn window_combinatorics() {
        let grams = enumerate_joint_ngrams(&[song(3)], Family::Smr);
        let total: usize = grams.iter().map(|g| g.count).sum();
        assert_eq!(total, 3);
        assert_eq!(grams.iter().filter(|g| g.n == 2).map(|g| g.count).sum::<usize>(), 2);
        assert_eq!(grams.iter().filter(|g| g.n == 3).map(|g| g.count).sum::<usize>(), 1);
    }

    #[test]
    fn identical_songs_double_counts() {
        let one = enumerate_joint_ngrams(&[song(5)], Family::Srr);
        let two = enumerate_joint_ngrams(&[song(5), song(5)], Family::Srr);
        assert_eq!(one.len(), two.len());
        for (a, b) in one.iter().zip(&two) {
            assert_eq!(2 * a.count, b.count);
        }
    }

    #[test]
    fn short_song_has_no_ngrams() {
        assert!(enumerate_joint_ngrams(&[song(1)], Family::Smr).is_empty());
    }

    #[test]
    fn pattern_shapes() {
        assert_eq!(pattern_words("10|010"), 2);
        assert_eq!(pattern_notes("10|010"), 5);
        assert_eq!(pattern_notes("1"), 1);
        let f = SongFeatures::new(&song(3));
        assert_eq!(f.smr, vec!["0", "1", "0"]);
        assert_eq!(f.stress, vec!["1", "1", "1"]);
        assert_eq!(join_pattern(&f.smr, 0, 3), "0|1|0");
    }

    #[test]
    fn word_boundaries_distinguish_patterns() {
        // 2 words over 3 notes differs from 3 words over 3 notes
        assert_ne!(join_pattern(&["01".into(), "0".into()], 0, 2), join_pattern(&["0".into(), "1".into(), "0".into()], 0, 3));
    }
}
