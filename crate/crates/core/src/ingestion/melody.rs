//! Melody cleaning: meter and tempo checks, octave transposition,
//! grid quantization and empty-bar removal.

use serde::{Deserialize, Serialize};

use super::midi::{RawNote, RawSong, TempoEvent, TimeSignature};
use super::{RejectReason, Rejection};
use crate::representation::{duration_values, tempo_class, Note, MAX_BARS, TICKS_PER_BAR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MelodyRules {
    pub min_bars: usize,
    /// Inclusive lower bound of the vocal range.
    pub pitch_low: u8,
    /// Exclusive upper bound of the vocal range.
    pub pitch_high: u8,
}

impl Default for MelodyRules {
    fn default() -> Self {
        MelodyRules {
            min_bars: 8,
            pitch_low: 48,
            pitch_high: 72,
        }
    }
}

/// A cleaned melody plus the information needed to map raw ticks onto it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Melody {
    pub notes: Vec<Note>,
    pub bpm: f64,
    /// Semitone shift applied to every pitch.
    pub transposition: i32,
    /// Original indices of the bars that were removed, ascending.
    pub removed_bars: Vec<u32>,
}

impl Melody {
    /// Maps a raw tick onto the cleaned timeline. Ticks inside a removed
    /// bar land on the start of the next kept bar.
    pub fn map_tick(&self, tick: u32) -> u32 {
        let bar = tick / TICKS_PER_BAR;
        let before = self.removed_bars.partition_point(|&b| b < bar) as u32;
        if self.removed_bars.binary_search(&bar).is_ok() {
            (bar - before) * TICKS_PER_BAR
        } else {
            tick - before * TICKS_PER_BAR
        }
    }

    /// Rebuilds a single-track raw song from the cleaned melody.
    pub fn to_raw(&self) -> RawSong {
        RawSong {
            tracks: vec![self
                .notes
                .iter()
                .map(|n| RawNote {
                    onset: n.onset(),
                    pitch: n.pitch,
                    duration: n.duration as u32,
                    velocity: 96,
                })
                .collect()],
            tempos: vec![TempoEvent {
                tick: 0,
                micros_per_quarter: (60_000_000.0 / self.bpm).round() as u32,
            }],
            time_signatures: vec![TimeSignature {
                tick: 0,
                numerator: 4,
                denominator: 4,
            }],
            lyrics: Vec::new(),
            lyric_track: None,
            warnings: Vec::new(),
        }
    }
}

fn on_union_grid(t: u32) -> bool {
    t.is_multiple_of(30) || t.is_multiple_of(40)
}

/// Nearest multiple of 30 or 40; ties prefer the multiple of 30, then the earlier tick.
pub fn quantize_onset(tick: u32) -> u32 {
    let base = tick - tick % 120;
    let candidates = [0u32, 30, 40, 60, 80, 90, 120].map(|o| base + o);
    *candidates
        .iter()
        .filter(|&&c| on_union_grid(c))
        .min_by_key(|&&c| (c.abs_diff(tick), c % 30 != 0, c))
        .unwrap()
}

/// Nearest value of the duration vocabulary, with the same tie rule.
pub fn quantize_duration(duration: u32) -> u16 {
    *duration_values()
        .iter()
        .min_by_key(|&&d| ((d as u32).abs_diff(duration), d % 30 != 0, d))
        .unwrap()
}

/// Octave shift (in semitones) that puts the most notes into the vocal range;
/// ties go to the smaller absolute shift, then the downward one.
pub fn best_octave_shift(pitches: &[u8], low: u8, high: u8) -> i32 {
    let (min, max) = match (pitches.iter().min(), pitches.iter().max()) {
        (Some(&a), Some(&b)) => (a as i32, b as i32),
        _ => return 0,
    };
    (-10..=10)
        .map(|k| k * 12)
        .filter(|s| min + s >= 0 && max + s <= 127)
        .max_by_key(|&s| {
            let inside = pitches
                .iter()
                .filter(|&&p| (low as i32..high as i32).contains(&(p as i32 + s)))
                .count();
            (inside, -s.abs(), -s)
        })
        .unwrap_or(0)
}

fn monophonic(mut notes: Vec<RawNote>) -> Vec<RawNote> {
    notes.sort_by_key(|n| (n.onset, std::cmp::Reverse(n.pitch)));
    let mut kept: Vec<RawNote> = Vec::with_capacity(notes.len());
    for n in notes {
        match kept.last() {
            Some(last) if n.onset < last.onset + last.duration => {
                if n.pitch > last.pitch {
                    kept.pop();
                    kept.push(n);
                }
            }
            _ => kept.push(n),
        }
    }
    kept
}

/// Resolves collisions introduced by quantization until none remain:
/// equal onsets keep the higher pitch, overlaps are shortened to fit, and
/// notes closer together than the shortest duration lose the lower pitch.
fn settle(mut notes: Vec<(u32, u8, u16)>) -> Vec<(u32, u8, u16)> {
    loop {
        notes.sort_by_key(|&(onset, pitch, _)| (onset, std::cmp::Reverse(pitch)));
        let mut changed = false;
        let mut out: Vec<(u32, u8, u16)> = Vec::with_capacity(notes.len());
        for n in notes {
            if let Some(last) = out.last_mut() {
                let gap = n.0 - last.0;
                if gap < duration_values()[0] as u32 {
                    changed = true;
                    if n.1 > last.1 {
                        *last = n;
                    }
                    continue;
                }
                if last.0 + last.2 as u32 > n.0 {
                    last.2 = *duration_values().iter().rev().find(|&&d| d as u32 <= gap).unwrap();
                    changed = true;
                }
            }
            out.push(n);
        }
        notes = out;
        if !changed {
            return notes;
        }
    }
}

pub fn process_melody(raw: &RawSong, rules: &MelodyRules) -> Result<Melody, Rejection> {
    if raw
        .time_signatures
        .iter()
        .any(|ts| ts.numerator != 4 || ts.denominator != 4)
    {
        return Err(Rejection::new(RejectReason::NonFourFour, "time signature other than 4/4"));
    }
    let mut tempos: Vec<u32> = raw.tempos.iter().map(|t| t.micros_per_quarter).collect();
    tempos.dedup();
    if tempos.len() > 1 {
        return Err(Rejection::new(
            RejectReason::TempoChange,
            format!("{} distinct tempo values", tempos.len()),
        ));
    }
    let bpm = tempos.first().map_or(120.0, |&m| 60_000_000.0 / m as f64);
    let tempo = tempo_class(bpm)
        .map_err(|e| Rejection::new(RejectReason::TempoChange, e.to_string()))?;

    let raw_notes = monophonic(raw.melody().to_vec());
    if raw_notes.is_empty() {
        return Err(Rejection::new(RejectReason::NoNotes, "melody track has no notes"));
    }
    let pitches: Vec<u8> = raw_notes.iter().map(|n| n.pitch).collect();
    let shift = best_octave_shift(&pitches, rules.pitch_low, rules.pitch_high);

    let quantized = settle(
        raw_notes
            .iter()
            .map(|n| {
                (
                    quantize_onset(n.onset),
                    (n.pitch as i32 + shift) as u8,
                    quantize_duration(n.duration),
                )
            })
            .collect(),
    );

    let last_end = quantized.iter().map(|n| n.0 + n.2 as u32).max().unwrap();
    let bar_total = last_end.div_ceil(TICKS_PER_BAR);
    let mut occupied = vec![false; bar_total as usize];
    for &(onset, _, dur) in &quantized {
        let first = onset / TICKS_PER_BAR;
        let last = (onset + dur as u32 - 1) / TICKS_PER_BAR;
        for b in first..=last {
            occupied[b as usize] = true;
        }
    }
    let removed_bars: Vec<u32> = (0..bar_total).filter(|&b| !occupied[b as usize]).collect();
    let kept_bars = bar_total as usize - removed_bars.len();
    if kept_bars < rules.min_bars {
        return Err(Rejection::new(
            RejectReason::MinBars,
            format!("{kept_bars} bars < {}", rules.min_bars),
        ));
    }
    let mut melody = Melody {
        notes: Vec::new(),
        bpm,
        transposition: shift,
        removed_bars,
    };
    let mut notes = Vec::with_capacity(quantized.len());
    for (onset, pitch, duration) in quantized {
        let onset = melody.map_tick(onset);
        if (onset / TICKS_PER_BAR) as usize >= MAX_BARS {
            return Err(Rejection::new(
                RejectReason::Capacity,
                format!("melody runs past bar {}", MAX_BARS - 1),
            ));
        }
        notes.push(Note::at(onset, pitch, duration, tempo));
    }
    melody.notes = notes;
    Ok(melody)
}
