//! Run configuration shared by every command.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::ingestion::IngestConfig;
use crate::ngram::LexiconConfig;
use crate::pretraining::{Objective, PretrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    /// `all` for the four infilling objectives, or one objective name.
    pub objective: String,
    pub ingest: IngestConfig,
    pub lexicon: LexiconConfig,
    pub pretrain: PretrainConfig,
    pub paths: PathConfig,
}

/// File locations; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    /// Directory of MIDI files.
    pub input_dir: Option<PathBuf>,
    /// CMU-format pronouncing dictionary.
    pub dictionary: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub report: Option<PathBuf>,
    /// Holds `smr.lex` and `srr.lex`.
    pub lexicon_dir: Option<PathBuf>,
    pub batches: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            threads: 0,
            objective: "all".into(),
            ingest: IngestConfig::default(),
            lexicon: LexiconConfig::default(),
            pretrain: PretrainConfig::default(),
            paths: PathConfig::default(),
        }
    }
}

pub fn parse_objectives(selection: &str) -> Result<Vec<Objective>> {
    if selection == "all" {
        return Ok(Objective::INFILLING.to_vec());
    }
    Ok(vec![selection.parse()?])
}
