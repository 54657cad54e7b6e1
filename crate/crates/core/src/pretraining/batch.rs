use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    build_clm_sample, build_sample, sample_phrase_level, sample_rng, sample_song_level, sample_word_level, Corruption,
    Objective, PretrainConfig, PretrainSample, ReplacementPool, Span,
};
use crate::corpus::CorpusSong;
use crate::error::{Error, Result};
use crate::ngram::{NGramLexicon, SongFeatures};
use crate::phrase::{BoundarySource, PhraseSegmentation};
use crate::representation::{AlignedSong, TextVocab};

pub const BATCH_FORMAT_VERSION: u32 = 1;

/// One serialized sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub version: u32,
    pub song: String,
    pub song_index: usize,
    pub objective: Objective,
    pub seed: u64,
    /// `[part A, part B, part C]` lengths.
    pub parts: [usize; 3],
    /// Nine attribute indices per token.
    pub tokens: Vec<[u32; 9]>,
    /// `[word_id, phrase_id]` per token.
    pub alignment: Vec<[u8; 2]>,
    pub spans: Vec<Span>,
    pub c_order: Vec<usize>,
}

impl BatchRecord {
    pub fn new(sample: &PretrainSample, vocab: &TextVocab, song: &str, song_index: usize, seed: u64) -> Result<Self> {
        Ok(BatchRecord {
            version: BATCH_FORMAT_VERSION,
            song: song.to_string(),
            song_index,
            objective: sample.objective,
            seed,
            parts: [sample.part_a, sample.part_b, sample.part_c],
            tokens: sample.tokens.iter().map(|t| t.record(vocab).map(|r| r.0)).collect::<Result<_>>()?,
            alignment: sample.alignment.iter().map(|a| [a.word_id, a.phrase_id]).collect(),
            spans: sample.spans.clone(),
            c_order: sample.c_order.clone(),
        })
    }

    pub fn write_jsonl<W: Write>(records: &[BatchRecord], mut out: W) -> Result<()> {
        for r in records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub samples: usize,
    pub skipped_empty: usize,
    pub skipped_length: usize,
    /// Sampled notes and total notes over the emitted samples.
    pub covered_notes: usize,
    pub total_notes: usize,
    pub spans: usize,
    pub mask_out: usize,
    pub random_replace: usize,
    pub keep_original: usize,
}

impl CoverageStats {
    pub fn coverage(&self) -> f64 {
        if self.total_notes == 0 {
            0.0
        } else {
            self.covered_notes as f64 / self.total_notes as f64
        }
    }

    fn add_sample(&mut self, sample: &PretrainSample, notes: usize) {
        self.samples += 1;
        self.total_notes += notes;
        if sample.objective == Objective::Clm {
            self.covered_notes += notes;
            return;
        }
        for s in &sample.spans {
            self.spans += 1;
            self.covered_notes += s.len;
            match s.action {
                Corruption::MaskOut => self.mask_out += 1,
                Corruption::RandomReplace => self.random_replace += 1,
                Corruption::KeepOriginal => self.keep_original += 1,
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub objectives: BTreeMap<Objective, CoverageStats>,
}

impl BatchSummary {
    pub fn render(&self) -> String {
        let mut out = String::from("objective\tsamples\tskipped_empty\tskipped_length\tcoverage\tspans\tmask\treplace\tkeep\n");
        for (o, s) in &self.objectives {
            out.push_str(&format!(
                "{o}\t{}\t{}\t{}\t{:.4}\t{}\t{}\t{}\t{}\n",
                s.samples,
                s.skipped_empty,
                s.skipped_length,
                s.coverage(),
                s.spans,
                s.mask_out,
                s.random_replace,
                s.keep_original
            ));
        }
        out
    }
}

enum Outcome {
    Sample(Box<PretrainSample>),
    Empty,
    TooLong,
}

/// Corpus-wide inputs shared by every sample.
struct Context<'a> {
    features: &'a [SongFeatures],
    lexicon: Option<&'a NGramLexicon>,
    pool: &'a ReplacementPool,
    cfg: &'a PretrainConfig,
    seed: u64,
}

fn one_sample(ctx: &Context<'_>, song: &AlignedSong, index: usize, objective: Objective) -> Result<Outcome> {
    let cfg = ctx.cfg;
    let mut rng = sample_rng(ctx.seed, index, objective);
    let spans = match objective {
        Objective::Clm => {
            return Ok(match build_clm_sample(song, cfg.max_len) {
                Ok(s) => Outcome::Sample(Box::new(s)),
                Err(Error::Capacity { .. }) => Outcome::TooLong,
                Err(e) => return Err(e),
            })
        }
        Objective::WordSmr | Objective::WordSrr => {
            let lexicon = ctx.lexicon.ok_or(Error::MissingLexicon)?;
            let family = objective.family().unwrap();
            sample_word_level(song, &ctx.features[index], lexicon, family, ctx.pool, cfg, &mut rng)
        }
        Objective::Phrase => {
            let seg = PhraseSegmentation::from_song(song, BoundarySource::Lyrics);
            sample_phrase_level(song, &seg, cfg, &mut rng)
        }
        Objective::Song => sample_song_level(song, cfg, &mut rng),
    };
    if spans.is_empty() {
        return Ok(Outcome::Empty);
    }
    Ok(match build_sample(song, &spans, cfg.max_len, &mut rng) {
        Ok(s) => Outcome::Sample(Box::new(s)),
        Err(Error::Capacity { .. }) => Outcome::TooLong,
        Err(e) => return Err(e),
    })
}

/// Builds samples for every song and objective. Records come out song by
/// song, objectives in the order given; each (song, objective) pair draws
/// from its own stream of the master seed.
pub fn make_batches(
    corpus: &[CorpusSong],
    lexicon: Option<&NGramLexicon>,
    objectives: &[Objective],
    cfg: &PretrainConfig,
    seed: u64,
) -> Result<(Vec<BatchRecord>, BatchSummary, TextVocab)> {
    let songs: Vec<AlignedSong> = corpus.iter().map(|c| c.song.clone()).collect();
    let vocab = TextVocab::from_songs(&songs);
    let features: Vec<SongFeatures> = songs.par_iter().map(SongFeatures::new).collect();
    let needs_lexicon = objectives.iter().any(|o| o.family().is_some());
    if needs_lexicon && lexicon.is_none_or(NGramLexicon::is_empty) {
        return Err(Error::MissingLexicon);
    }
    let pool = match (needs_lexicon, lexicon) {
        (true, Some(lex)) => ReplacementPool::new(&songs, &features, lex),
        _ => ReplacementPool::default(),
    };
    let ctx = Context { features: &features, lexicon, pool: &pool, cfg, seed };
    let per_song: Vec<Result<Vec<(Objective, Outcome)>>> = songs
        .par_iter()
        .enumerate()
        .map(|(i, song)| {
            objectives
                .iter()
                .map(|&o| Ok((o, one_sample(&ctx, song, i, o)?)))
                .collect()
        })
        .collect();
    let mut records = Vec::new();
    let mut summary = BatchSummary::default();
    for o in objectives {
        summary.objectives.entry(*o).or_default();
    }
    for (i, outcomes) in per_song.into_iter().enumerate() {
        for (objective, outcome) in outcomes? {
            let stats = summary.objectives.get_mut(&objective).unwrap();
            match outcome {
                Outcome::Sample(s) => {
                    stats.add_sample(&s, songs[i].notes.len());
                    records.push(BatchRecord::new(&s, &vocab, &corpus[i].id, i, seed)?);
                }
                Outcome::Empty => {
                    log::info!("song {}: no {objective} spans, sample skipped", corpus[i].id);
                    stats.skipped_empty += 1;
                }
                Outcome::TooLong => {
                    log::info!("song {}: {objective} sample exceeds {} tokens, skipped", corpus[i].id, cfg.max_len);
                    stats.skipped_length += 1;
                }
            }
        }
    }
    Ok((records, summary, vocab))
}
