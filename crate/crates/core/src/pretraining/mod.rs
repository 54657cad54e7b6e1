//! Blank-infilling training samples: span sampling at word, phrase and
//! song level, the three-part corrupted layout, attention masks and the
//! span loss.

mod attention;
mod batch;
mod layout;
mod spans;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ngram::Family;
use crate::representation::Note;

pub use attention::{attention_mask, masked_attention_weights, span_nll, AttentionMaskSpec};
pub use batch::{make_batches, BatchRecord, BatchSummary, CoverageStats, BATCH_FORMAT_VERSION};
pub use layout::{build_clm_sample, build_sample, PretrainSample};
pub use spans::{sample_phrase_level, sample_song_level, sample_word_level, ReplacementPool};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    WordSmr,
    WordSrr,
    Phrase,
    Song,
    /// Causal layout used for fine-tuning.
    Clm,
}

impl Objective {
    /// The four infilling objectives.
    pub const INFILLING: [Objective; 4] = [Objective::WordSmr, Objective::WordSrr, Objective::Phrase, Objective::Song];

    pub fn name(self) -> &'static str {
        match self {
            Objective::WordSmr => "word-smr",
            Objective::WordSrr => "word-srr",
            Objective::Phrase => "phrase",
            Objective::Song => "song",
            Objective::Clm => "clm",
        }
    }

    pub fn family(self) -> Option<Family> {
        match self {
            Objective::WordSmr => Some(Family::Smr),
            Objective::WordSrr => Some(Family::Srr),
            _ => None,
        }
    }

    fn stream(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Objective::WordSmr, Objective::WordSrr, Objective::Phrase, Objective::Song, Objective::Clm]
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown objective {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Corruption {
    MaskOut,
    RandomReplace,
    KeepOriginal,
}

/// A contiguous run of sampled notes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub len: usize,
    pub action: Corruption,
    /// Notes shown in place of the span under `RandomReplace`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<Vec<Note>>,
}

impl Span {
    pub fn masked(start: usize, len: usize) -> Self {
        Span { start, len, action: Corruption::MaskOut, replacement: None }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanSet {
    pub objective: Objective,
    /// Disjoint and sorted by start.
    pub spans: Vec<Span>,
}

impl SpanSet {
    pub fn covered(&self) -> usize {
        self.spans.iter().map(|s| s.len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    pub fn check(&self, notes: usize) -> Result<()> {
        let mut end = 0;
        for s in &self.spans {
            if s.len == 0 || s.start < end || s.end() > notes {
                return Err(Error::invalid(format!("span {}..{} is empty, overlapping or out of range", s.start, s.end())));
            }
            if let Some(r) = &s.replacement {
                if r.len() != s.len {
                    return Err(Error::invalid("replacement length differs from span length"));
                }
            }
            end = s.end();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub word_budget: f64,
    pub phrase_budget: f64,
    pub song_budget: f64,
    pub mask_prob: f64,
    pub replace_prob: f64,
    pub max_len: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            word_budget: 0.15,
            phrase_budget: 0.5,
            song_budget: 0.5,
            mask_prob: 0.8,
            replace_prob: 0.1,
            max_len: 768,
        }
    }
}

/// Generator for one (song, objective) pair, independent of every other pair.
pub fn sample_rng(master_seed: u64, song_index: usize, objective: Objective) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((song_index as u64) << 3) | objective.stream());
    rng
}
