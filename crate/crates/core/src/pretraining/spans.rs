use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Corruption, Objective, PretrainConfig, Span, SpanSet};
use crate::ngram::{max_match_sample, Family, NGramLexicon, SongFeatures};
use crate::phrase::PhraseSegmentation;
use crate::representation::{AlignedSong, Note, MAX_BARS, TICKS_PER_BAR};

/// Where each retained lexicon pattern occurs in a corpus, for drawing
/// replacement melodies.
#[derive(Debug, Clone, Default)]
pub struct ReplacementPool {
    /// family -> note length -> patterns with their occurrences.
    by_len: BTreeMap<(Family, usize), Vec<Vec<Vec<Note>>>>,
}

impl ReplacementPool {
    pub fn new(corpus: &[AlignedSong], features: &[SongFeatures], lexicon: &NGramLexicon) -> Self {
        let mut occ: BTreeMap<(Family, String), Vec<Vec<Note>>> = BTreeMap::new();
        for (song, f) in corpus.iter().zip(features) {
            let w = f.word_count();
            for family in Family::ALL {
                let lex = lexicon.family(family);
                if lex.is_empty() {
                    continue;
                }
                for n in crate::ngram::MIN_N..=crate::ngram::MAX_N.min(w) {
                    for start in 0..=w - n {
                        let p = crate::ngram::join_pattern(f.melodic(family), start, n);
                        if lex.contains(&p) {
                            let r = f.word_notes[start].start..f.word_notes[start + n - 1].end;
                            occ.entry((family, p)).or_default().push(song.notes[r].to_vec());
                        }
                    }
                }
            }
        }
        let mut by_len: BTreeMap<(Family, usize), Vec<Vec<Vec<Note>>>> = BTreeMap::new();
        for ((family, _), notes) in occ {
            by_len.entry((family, notes[0].len())).or_default().push(notes);
        }
        ReplacementPool { by_len }
    }

    /// A uniformly drawn pattern of `len` notes, then a uniformly drawn
    /// occurrence of it, re-timed to start at `onset`.
    pub fn draw<R: Rng>(&self, family: Family, len: usize, onset: u32, rng: &mut R) -> Option<Vec<Note>> {
        let patterns = self.by_len.get(&(family, len))?;
        let occurrences = &patterns[rng.random_range(0..patterns.len())];
        let notes = &occurrences[rng.random_range(0..occurrences.len())];
        let base = notes[0].onset();
        let out: Vec<Note> = notes
            .iter()
            .map(|n| Note::at(onset + n.onset() - base, n.pitch, n.duration, n.tempo))
            .collect();
        let last_bar = out.last().unwrap().onset() / TICKS_PER_BAR;
        (last_bar < MAX_BARS as u32).then_some(out)
    }
}

fn draw_action<R: Rng>(cfg: &PretrainConfig, rng: &mut R) -> Corruption {
    let u: f64 = rng.random();
    if u < cfg.mask_prob {
        Corruption::MaskOut
    } else if u < cfg.mask_prob + cfg.replace_prob {
        Corruption::RandomReplace
    } else {
        Corruption::KeepOriginal
    }
}

/// Lexicon spans of one family covering about `word_budget` of the notes,
/// each with a corruption action.
pub fn sample_word_level<R: Rng>(
    song: &AlignedSong,
    features: &SongFeatures,
    lexicon: &NGramLexicon,
    family: Family,
    pool: &ReplacementPool,
    cfg: &PretrainConfig,
    rng: &mut R,
) -> SpanSet {
    let objective = match family {
        Family::Smr => Objective::WordSmr,
        Family::Srr => Objective::WordSrr,
    };
    let matches = max_match_sample(features, lexicon, &[family], cfg.word_budget, rng);
    let spans = matches
        .into_iter()
        .map(|m| {
            let (start, len) = (m.notes.start, m.notes.len());
            let action = draw_action(cfg, rng);
            let mut replacement = None;
            if action == Corruption::RandomReplace {
                let onset = song.notes[start].onset();
                replacement = Some(
                    pool.draw(family, len, onset, rng)
                        .unwrap_or_else(|| song.notes[start..start + len].to_vec()),
                );
            }
            Span { start, len, action, replacement }
        })
        .collect();
    SpanSet { objective, spans }
}

/// Whole phrases in random order until they cover at least `phrase_budget`
/// of the notes.
pub fn sample_phrase_level<R: Rng>(
    song: &AlignedSong,
    seg: &PhraseSegmentation,
    cfg: &PretrainConfig,
    rng: &mut R,
) -> SpanSet {
    let target = crate::ngram::budget_target(cfg.phrase_budget, song.notes.len());
    let mut ranges = seg.ranges();
    ranges.shuffle(rng);
    let mut chosen = Vec::new();
    let mut covered = 0;
    for r in ranges {
        if covered >= target {
            break;
        }
        covered += r.len();
        chosen.push(Span::masked(r.start, r.len()));
    }
    chosen.sort_by_key(|s| s.start);
    SpanSet { objective: Objective::Phrase, spans: chosen }
}

/// One span of `ceil(song_budget * n)` notes at a uniform start.
pub fn sample_song_level<R: Rng>(song: &AlignedSong, cfg: &PretrainConfig, rng: &mut R) -> SpanSet {
    let n = song.notes.len();
    let len = crate::ngram::budget_target(cfg.song_budget, n).clamp(1, n);
    let start = rng.random_range(0..=n - len);
    SpanSet { objective: Objective::Song, spans: vec![Span::masked(start, len)] }
}
