use std::ops::Range;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Corruption, Objective, Span, SpanSet};
use crate::error::{Error, Result};
use crate::representation::{AlignedSong, AlignmentIds, Note, SpecialKind, Token};

/// One training example: words (part A), corrupted notes (part B) and the
/// span targets (part C), with the alignment IDs of every position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSample {
    pub objective: Objective,
    pub tokens: Vec<Token>,
    pub alignment: Vec<AlignmentIds>,
    pub part_a: usize,
    pub part_b: usize,
    pub part_c: usize,
    /// Sampled spans in note order; empty for the causal layout.
    pub spans: Vec<Span>,
    /// Order in which the spans appear in part C.
    pub c_order: Vec<usize>,
}

impl PretrainSample {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn part_ranges(&self) -> [Range<usize>; 3] {
        let b = self.part_a + self.part_b;
        [0..self.part_a, self.part_a..b, b..b + self.part_c]
    }

    /// Part C positions that are predicted: everything except separators.
    pub fn target_positions(&self) -> Vec<usize> {
        self.part_ranges()[2]
            .clone()
            .filter(|&i| !matches!(self.tokens[i], Token::Special(SpecialKind::Sep)))
            .collect()
    }

    /// Part C note contents of each span, indexed like `spans`.
    pub fn span_targets(&self) -> Vec<Vec<Note>> {
        let mut out = vec![Vec::new(); self.spans.len()];
        let mut cur = None;
        let mut k = 0;
        for i in self.part_ranges()[2].clone() {
            match &self.tokens[i] {
                Token::Special(SpecialKind::Sep) => {
                    cur = Some(self.c_order[k]);
                    k += 1;
                }
                Token::Note { note, .. } => {
                    if let Some(s) = cur {
                        out[s].push(*note);
                    }
                }
                _ => {}
            }
        }
        out
    }
}

fn check_len(len: usize, max_len: usize) -> Result<()> {
    if len > max_len {
        return Err(Error::Capacity { what: "sample length", got: len, limit: max_len });
    }
    Ok(())
}

fn push(tokens: &mut Vec<Token>, alignment: &mut Vec<AlignmentIds>, token: Token, ids: AlignmentIds) {
    tokens.push(token);
    alignment.push(ids);
}

/// Lays out an infilling sample. Part C lists the spans in an order
/// shuffled by `rng`, each after a separator carrying the IDs of the
/// span's first note.
pub fn build_sample<R: Rng>(song: &AlignedSong, spans: &SpanSet, max_len: usize, rng: &mut R) -> Result<PretrainSample> {
    if spans.is_empty() {
        return Err(Error::invalid("empty objective: no spans were sampled"));
    }
    spans.check(song.notes.len())?;
    let masked: usize = spans.spans.iter().filter(|s| s.action == Corruption::MaskOut).map(|s| s.len - 1).sum();
    let total = song.words.len() + song.notes.len() - masked + spans.spans.len() + spans.covered();
    check_len(total, max_len)?;

    let mut tokens = Vec::with_capacity(total);
    let mut alignment = Vec::with_capacity(total);
    for w in 0..song.words.len() {
        push(&mut tokens, &mut alignment, song.word_token(w), song.word_ids(w));
    }
    let part_a = tokens.len();

    let mut i = 0;
    let mut next = spans.spans.iter().peekable();
    while i < song.notes.len() {
        match next.next_if(|s| s.start == i) {
            Some(span) => {
                match span.action {
                    Corruption::MaskOut => {
                        push(&mut tokens, &mut alignment, Token::Special(SpecialKind::Mask), song.note_ids(i));
                    }
                    Corruption::RandomReplace => {
                        let notes = span.replacement.as_deref().unwrap_or(&song.notes[span.start..span.end()]);
                        for (k, note) in notes.iter().enumerate() {
                            let ids = song.note_ids(i + k);
                            push(&mut tokens, &mut alignment, Token::Note { note: *note, ids }, ids);
                        }
                    }
                    Corruption::KeepOriginal => {
                        for k in span.start..span.end() {
                            push(&mut tokens, &mut alignment, song.note_token(k), song.note_ids(k));
                        }
                    }
                }
                i = span.end();
            }
            None => {
                push(&mut tokens, &mut alignment, song.note_token(i), song.note_ids(i));
                i += 1;
            }
        }
    }
    let part_b = tokens.len() - part_a;

    let mut c_order: Vec<usize> = (0..spans.spans.len()).collect();
    c_order.shuffle(rng);
    for &s in &c_order {
        let span = &spans.spans[s];
        push(&mut tokens, &mut alignment, Token::Special(SpecialKind::Sep), song.note_ids(span.start));
        for k in span.start..span.end() {
            push(&mut tokens, &mut alignment, song.note_token(k), song.note_ids(k));
        }
    }
    let part_c = tokens.len() - part_a - part_b;
    debug_assert_eq!(tokens.len(), total);
    Ok(PretrainSample {
        objective: spans.objective,
        tokens,
        alignment,
        part_a,
        part_b,
        part_c,
        spans: spans.spans.clone(),
        c_order,
    })
}

/// Causal layout: words, then BOS, then every note and EOS as targets.
pub fn build_clm_sample(song: &AlignedSong, max_len: usize) -> Result<PretrainSample> {
    if song.notes.is_empty() {
        return Err(Error::invalid("causal sample needs at least one note"));
    }
    let total = song.words.len() + song.notes.len() + 2;
    check_len(total, max_len)?;
    let mut tokens = Vec::with_capacity(total);
    let mut alignment = Vec::with_capacity(total);
    for w in 0..song.words.len() {
        push(&mut tokens, &mut alignment, song.word_token(w), song.word_ids(w));
    }
    push(&mut tokens, &mut alignment, Token::Special(SpecialKind::Bos), song.note_ids(0));
    for k in 0..song.notes.len() {
        push(&mut tokens, &mut alignment, song.note_token(k), song.note_ids(k));
    }
    let last = song.notes.len() - 1;
    push(&mut tokens, &mut alignment, Token::Special(SpecialKind::Eos), song.note_ids(last));
    Ok(PretrainSample {
        objective: Objective::Clm,
        tokens,
        alignment,
        part_a: song.words.len(),
        part_b: 1,
        part_c: song.notes.len() + 1,
        spans: Vec::new(),
        c_order: Vec::new(),
    })
}
