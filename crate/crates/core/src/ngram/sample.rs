use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{join_pattern, Family, NGramLexicon, SongFeatures, MAX_N, MIN_N};

/// A lexicon pattern matched in a song.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchedSpan {
    pub family: Family,
    pub pattern: String,
    pub first_word: usize,
    pub words: usize,
    pub notes: Range<usize>,
}

/// Note count a budget fraction asks for.
pub fn budget_target(budget: f64, notes: usize) -> usize {
    ((budget * notes as f64) - 1e-9).ceil().max(0.0) as usize
}

fn matches_at(
    features: &SongFeatures,
    lexicon: &NGramLexicon,
    families: &[Family],
    taken: &[bool],
    w: usize,
) -> Vec<MatchedSpan> {
    let mut matches = Vec::new();
    let longest = MAX_N.min(taken.len() - w);
    for n in (MIN_N..=longest).rev() {
        if taken[w..w + n].iter().any(|&t| t) {
            continue;
        }
        for &family in families {
            let pattern = join_pattern(features.melodic(family), w, n);
            if lexicon.family(family).contains(&pattern) {
                matches.push(MatchedSpan {
                    family,
                    pattern,
                    first_word: w,
                    words: n,
                    notes: features.word_notes[w].start..features.word_notes[w + n - 1].end,
                });
            }
        }
    }
    matches
}

/// Greedy maximum matching of lexicon patterns from randomly ordered start
/// words.
///
/// At each start the longest pattern that still fits in the remaining
/// budget wins (earlier families in `families` win on equal length). If the
/// budget is still short once every start has been tried, the smallest
/// remaining match overshoots it. Matched words never overlap. Spans come
/// back in note order.
pub fn max_match_sample<R: Rng>(
    features: &SongFeatures,
    lexicon: &NGramLexicon,
    families: &[Family],
    budget: f64,
    rng: &mut R,
) -> Vec<MatchedSpan> {
    let w_count = features.word_count();
    let target = budget_target(budget, features.note_count());
    let mut taken = vec![false; w_count];
    let mut covered = 0usize;
    let mut spans = Vec::new();
    let mut order: Vec<usize> = (0..w_count).collect();
    order.shuffle(rng);
    let mut take = |m: MatchedSpan, taken: &mut [bool], covered: &mut usize| {
        taken[m.first_word..m.first_word + m.words].fill(true);
        *covered += m.notes.len();
        spans.push(m);
    };
    for &w in &order {
        if covered >= target {
            break;
        }
        if taken[w] {
            continue;
        }
        let remaining = target - covered;
        let fit = matches_at(features, lexicon, families, &taken, w)
            .into_iter()
            .find(|m| m.notes.len() <= remaining);
        if let Some(m) = fit {
            take(m, &mut taken, &mut covered);
        }
    }
    if covered < target {
        let mut best: Option<MatchedSpan> = None;
        for &w in &order {
            if taken[w] {
                continue;
            }
            for m in matches_at(features, lexicon, families, &taken, w) {
                if best.as_ref().is_none_or(|b| m.notes.len() < b.notes.len()) {
                    best = Some(m);
                }
            }
        }
        if let Some(m) = best {
            take(m, &mut taken, &mut covered);
        }
    }
    spans.sort_by_key(|m| m.notes.start);
    spans
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ngram::{FamilyLexicon, LexiconEntry, NGramScore};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn features(segs: &[&str]) -> SongFeatures {
        let mut start = 0;
        let word_notes = segs
            .iter()
            .map(|s| {
                let r = start..start + s.len();
                start = r.end;
                r
            })
            .collect();
        let v: Vec<String> = segs.iter().map(|s| s.to_string()).collect();
        SongFeatures { stress: v.clone(), smr: v.clone(), srr: v, word_notes }
    }

    fn lexicon(smr: &[&str], srr: &[&str]) -> NGramLexicon {
        let fam = |family, pats: &[&str]| {
            let entries = pats
                .iter()
                .map(|p| LexiconEntry {
                    pattern: p.to_string(),
                    n: crate::ngram::pattern_words(p),
                    notes: crate::ngram::pattern_notes(p),
                    count: 1,
                    score: NGramScore { s_l: 0.0, s_m: 0.0, s_lm: 0.0, s: 0.0, c: 1.0, h_norm: 0.0, m: 1 },
                })
                .collect();
            FamilyLexicon::new(family, 0.25, pats.len() * 4, entries)
        };
        NGramLexicon { corpus_sha256: String::new(), smr: fam(Family::Smr, smr), srr: fam(Family::Srr, srr) }
    }

    #[test]
    fn longest_match_wins() {
        let f = features(&["1", "0", "1"]);
        let lex = lexicon(&["1|0", "1|0|1"], &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spans = max_match_sample(&f, &lex, &Family::ALL, 1.0, &mut rng);
        assert_eq!(spans.len(), 1);
        assert_eq!(spans[0].words, 3);
    }

    #[test]
    fn smr_preferred_on_equal_length() {
        let f = features(&["1", "0"]);
        let lex = lexicon(&["1|0"], &["1|0"]);
        let spans = max_match_sample(&f, &lex, &Family::ALL, 1.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(spans[0].family, Family::Smr);
    }

    #[test]
    fn empty_lexicon() {
        let f = features(&["1", "0", "1"]);
        let lex = lexicon(&[], &[]);
        assert!(max_match_sample(&f, &lex, &Family::ALL, 0.15, &mut ChaCha8Rng::seed_from_u64(2)).is_empty());
    }

    #[test]
    fn budget_reached_and_disjoint() {
        let segs: Vec<&str> = (0..100).map(|i| if i % 2 == 0 { "1" } else { "0" }).collect();
        let f = features(&segs);
        let lex = lexicon(&["1|0", "0|1", "1|0|1"], &[]);
        for seed in 0..20 {
            let spans = max_match_sample(&f, &lex, &Family::ALL, 0.15, &mut ChaCha8Rng::seed_from_u64(seed));
            let total: usize = spans.iter().map(|s| s.notes.len()).sum();
            assert!((15..=17).contains(&total), "total {total}");
            for w in spans.windows(2) {
                assert!(w[0].notes.end <= w[1].notes.start);
            }
        }
    }
}
