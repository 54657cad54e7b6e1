//! Lyric cleaning, syllable merging and lyric-level filters.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::midi::{LyricEvent, RawSong};
use super::{RejectReason, Rejection};
use crate::features::{syllable_stress, PronouncingDictionary};
use crate::representation::Word;

/// Quotes, comma, colon, semicolon, period, question and exclamation marks.
pub const PUNCTUATION: [char; 8] = ['\'', '"', ',', ':', ';', '.', '?', '!'];

pub fn is_punctuation(c: char) -> bool {
    PUNCTUATION.contains(&c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyricRules {
    /// Reject when `1 - distinct / total` exceeds this.
    pub max_repetition: f64,
    /// Reject when the share of long or short words exceeds this.
    pub max_long_short: f64,
    pub short_max_letters: usize,
    pub long_min_letters: usize,
}

impl Default for LyricRules {
    fn default() -> Self {
        LyricRules {
            max_repetition: 0.2,
            max_long_short: 0.5,
            short_max_letters: 2,
            long_min_letters: 10,
        }
    }
}

/// A dictionary word with the tick of its first syllable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LyricWord {
    pub word: Word,
    pub tick: u32,
}

fn is_break(c: char) -> bool {
    c.is_whitespace() || c == '/' || c == '\\'
}

/// Joins syllable fragments into words.
///
/// Fragments are glued together unless whitespace (or a karaoke line
/// marker) separates them; a trailing hyphen always glues.
pub fn merge_syllables(fragments: &[LyricEvent]) -> Vec<(String, u32)> {
    let mut words = Vec::new();
    let mut cur = String::new();
    let mut cur_tick = 0;
    let mut glue = false;
    let flush = |cur: &mut String, tick: u32, words: &mut Vec<(String, u32)>| {
        if !cur.is_empty() {
            words.push((std::mem::take(cur), tick));
        }
    };
    for frag in fragments {
        let mut text = frag.text.as_str();
        if glue {
            text = text.trim_start_matches(is_break);
        }
        let trimmed = text.trim_end_matches(is_break);
        let hyphen = trimmed.ends_with('-');
        let body = if hyphen { trimmed.trim_end_matches('-') } else { text };
        for c in body.chars() {
            if is_break(c) {
                flush(&mut cur, cur_tick, &mut words);
            } else {
                if cur.is_empty() {
                    cur_tick = frag.tick;
                }
                cur.push(c);
            }
        }
        glue = hyphen;
    }
    flush(&mut cur, cur_tick, &mut words);
    words
}

/// Splits a merged word into its lowercase lexical form and its punctuation.
///
/// Apostrophes between letters stay in the word (`don't`); everything that
/// is neither a letter nor one of the kept punctuation marks is discarded.
pub fn clean_word(raw: &str) -> (String, String) {
    let kept: Vec<char> = raw
        .chars()
        .filter(|c| c.is_ascii_alphabetic() || is_punctuation(*c))
        .map(|c| c.to_ascii_lowercase())
        .collect();
    let mut text = String::new();
    let mut marks = String::new();
    for (i, &c) in kept.iter().enumerate() {
        let inner_apostrophe = c == '\''
            && i > 0
            && kept[i - 1].is_ascii_alphabetic()
            && kept.get(i + 1).is_some_and(|n| n.is_ascii_alphabetic());
        if c.is_ascii_alphabetic() || inner_apostrophe {
            text.push(c);
        } else {
            marks.push(c);
        }
    }
    (text, marks)
}

fn letters(word: &str) -> usize {
    word.chars().filter(char::is_ascii_alphabetic).count()
}

/// Cleans the lyric events of `raw` into dictionary words and applies the
/// repetition and long/short-word filters.
pub fn process_lyrics(
    raw: &RawSong,
    dict: &PronouncingDictionary,
    rules: &LyricRules,
) -> Result<Vec<LyricWord>, Rejection> {
    if raw.lyrics.is_empty() {
        return Err(Rejection::new(RejectReason::NoLyrics, "file has no lyric events"));
    }
    let mut out: Vec<LyricWord> = Vec::new();
    let mut misses = 0usize;
    for (raw_word, tick) in merge_syllables(&raw.lyrics) {
        let (text, marks) = clean_word(&raw_word);
        if text.is_empty() {
            // stray punctuation belongs to the previous word
            if let Some(prev) = out.last_mut() {
                prev.word.marks.push_str(&marks);
            }
            continue;
        }
        match syllable_stress(&text, dict) {
            Ok(stress) => out.push(LyricWord {
                word: Word::new(text, stress.0).with_marks(marks),
                tick,
            }),
            Err(_) => misses += 1,
        }
    }
    if out.is_empty() {
        return Err(Rejection::new(
            RejectReason::DictionaryMiss,
            format!("none of the {misses} words are in the dictionary"),
        ));
    }
    let total = out.len() as f64;
    let distinct: HashSet<&str> = out.iter().map(|w| w.word.text.as_str()).collect();
    let repetition = 1.0 - distinct.len() as f64 / total;
    if repetition > rules.max_repetition {
        return Err(Rejection::new(
            RejectReason::LyricRepetition,
            format!("repetition ratio {repetition:.3} > {}", rules.max_repetition),
        ));
    }
    let long_short = out
        .iter()
        .filter(|w| {
            let n = letters(&w.word.text);
            n <= rules.short_max_letters || n >= rules.long_min_letters
        })
        .count() as f64
        / total;
    if long_short > rules.max_long_short {
        return Err(Rejection::new(
            RejectReason::LongShortWords,
            format!("long/short word share {long_short:.3} > {}", rules.max_long_short),
        ));
    }
    Ok(out)
}
