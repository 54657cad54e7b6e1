//! Musical phrase boundary recognition from lyric punctuation or, when
//! lyrics are sparsely punctuated, from long notes and rests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::{AlignedSong, Note, Word, MAX_PHRASES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhraseConfig {
    /// A note at least this long is a phrase-ending candidate.
    pub long_note_ticks: u32,
    /// A note followed by at least this much silence is a candidate.
    pub rest_gap_ticks: u32,
    /// Adjacent candidates whose durations differ by more than this keep the earlier one.
    pub duration_gap: u32,
    /// Below this punctuation ratio the melody decides.
    pub min_punct_ratio: f64,
}

impl Default for PhraseConfig {
    fn default() -> Self {
        PhraseConfig {
            long_note_ticks: 480,
            rest_gap_ticks: 240,
            duration_gap: 240,
            min_punct_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundarySource {
    Lyrics,
    Melody,
}

/// Indices of the last note of every phrase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhraseSegmentation {
    pub endings: Vec<usize>,
    pub source: BoundarySource,
}

impl PhraseSegmentation {
    /// Reads the segmentation back from a song's note phrase IDs.
    pub fn from_song(song: &AlignedSong, source: BoundarySource) -> Self {
        let p = &song.note_phrase;
        let endings = (0..p.len()).filter(|&i| i + 1 == p.len() || p[i + 1] != p[i]).collect();
        PhraseSegmentation { endings, source }
    }

    pub fn phrase_count(&self) -> usize {
        self.endings.len()
    }

    /// Half-open note ranges of the phrases.
    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = 0;
        self.endings
            .iter()
            .map(|&e| {
                let r = start..e + 1;
                start = e + 1;
                r
            })
            .collect()
    }
}

pub fn lyrics_based_recognition(words: &[Word]) -> Vec<usize> {
    (0..words.len()).filter(|&i| words[i].has_punctuation()).collect()
}

/// Long notes and rest-followed notes, with adjacent candidates thinned
/// until no two consecutive note indices remain.
pub fn melody_based_recognition(notes: &[Note], cfg: &PhraseConfig) -> Vec<usize> {
    let mut me: Vec<usize> = (0..notes.len())
        .filter(|&i| {
            let long = notes[i].duration as u32 >= cfg.long_note_ticks;
            let rest = notes
                .get(i + 1)
                .is_some_and(|next| next.onset().saturating_sub(notes[i].end()) >= cfg.rest_gap_ticks);
            long || rest
        })
        .collect();
    let mut i = 1;
    while i < me.len() {
        let (a, b) = (me[i - 1], me[i]);
        if b == a + 1 {
            let d = notes[a].duration.abs_diff(notes[b].duration) as u32;
            if d > cfg.duration_gap {
                me.remove(i);
            } else {
                me.remove(i - 1);
            }
        } else {
            i += 1;
        }
    }
    me
}

pub fn punctuation_ratio(words: &[Word]) -> f64 {
    if words.is_empty() {
        return 0.0;
    }
    lyrics_based_recognition(words).len() as f64 / words.len() as f64
}

pub fn recognize_phrases(song: &AlignedSong, cfg: &PhraseConfig) -> PhraseSegmentation {
    let (mut endings, source) = if punctuation_ratio(&song.words) < cfg.min_punct_ratio {
        (melody_based_recognition(&song.notes, cfg), BoundarySource::Melody)
    } else {
        let ranges = song.word_note_ranges();
        let ends = lyrics_based_recognition(&song.words)
            .into_iter()
            .map(|w| ranges[w].end - 1)
            .collect();
        (ends, BoundarySource::Lyrics)
    };
    let last = song.notes.len() - 1;
    if endings.last() != Some(&last) {
        endings.push(last);
    }
    PhraseSegmentation { endings, source }
}

/// Writes phrase IDs into the song: notes by the phrase containing them,
/// words by the phrase of their first note.
pub fn assign_phrase_ids(song: &AlignedSong, seg: &PhraseSegmentation) -> Result<AlignedSong> {
    let n = song.notes.len();
    if seg.endings.is_empty()
        || seg.endings.last() != Some(&(n - 1))
        || seg.endings.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(Error::invalid("phrase endings must increase and end at the last note"));
    }
    if seg.endings.len() > MAX_PHRASES {
        return Err(Error::Capacity {
            what: "phrase count",
            got: seg.endings.len(),
            limit: MAX_PHRASES,
        });
    }
    let mut out = song.clone();
    for (p, r) in seg.ranges().into_iter().enumerate() {
        out.note_phrase[r].fill(p);
    }
    for (w, r) in song.word_note_ranges().into_iter().enumerate() {
        out.word_phrase[w] = out.note_phrase[r.start];
    }
    out.validate()?;
    Ok(out)
}

/// Recognizes phrases and writes the IDs in one step.
pub fn segment_song(song: &AlignedSong, cfg: &PhraseConfig) -> Result<(AlignedSong, PhraseSegmentation)> {
    let seg = recognize_phrases(song, cfg);
    Ok((assign_phrase_ids(song, &seg)?, seg))
}
