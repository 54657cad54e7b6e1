//! `lyrmel`: corpus ingestion, n-gram lexicons, pre-training batches and
//! evaluation from the command line.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | internal error |
//! | 2 | bad command line |
//! | 3 | bad configuration file or option value |
//! | 4 | I/O failure (missing input, unwritable output) |
//! | 5 | malformed input data |
//! | 6 | empty input |
//! | 7 | word-level objective without a lexicon |
//! | 8 | inconsistent input (pairing mismatch, capacity) |

mod commands;
mod exit;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lyrmel::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "lyrmel", version, about = "Lyric-melody corpus toolkit")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More log output on stderr (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn a directory of MIDI files into an aligned corpus.
    Ingest(IngestArgs),
    /// Score joint n-grams and write the SMR and SRR lexicons.
    BuildLexicon(LexiconArgs),
    /// Print phrase boundaries per song.
    Phrases(PhraseArgs),
    /// Build pre-training samples.
    MakeBatches(BatchArgs),
    /// Compare generated melodies with references.
    Evaluate(EvalArgs),
    /// Summary counts for a corpus.
    Stats(StatsArgs),
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CMU-format pronouncing dictionary.
    #[arg(long)]
    pub dict: Option<PathBuf>,
    /// Corpus JSONL to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Rejection report to write (also printed).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub max_repetition: Option<f64>,
    #[arg(long)]
    pub max_long_short: Option<f64>,
    #[arg(long)]
    pub short_max_letters: Option<usize>,
    #[arg(long)]
    pub long_min_letters: Option<usize>,
    #[arg(long)]
    pub min_bars: Option<usize>,
    #[arg(long)]
    pub pitch_low: Option<u8>,
    #[arg(long)]
    pub pitch_high: Option<u8>,
    #[command(flatten)]
    pub phrase: PhraseFlags,
}

#[derive(Args, Debug, Default)]
pub struct PhraseFlags {
    #[arg(long)]
    pub long_note_ticks: Option<u32>,
    #[arg(long)]
    pub rest_gap_ticks: Option<u32>,
    #[arg(long)]
    pub duration_gap: Option<u32>,
    #[arg(long)]
    pub min_punct_ratio: Option<f64>,
}

#[derive(Args, Debug)]
pub struct LexiconArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Directory for `smr.lex` and `srr.lex`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Fraction of candidates kept.
    #[arg(long)]
    pub cutoff: Option<f64>,
}

#[derive(Args, Debug)]
pub struct PhraseArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub phrase: PhraseFlags,
}

#[derive(Args, Debug)]
pub struct BatchArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub lexicon_dir: Option<PathBuf>,
    /// Batch JSONL to write.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Text vocabulary sidecar; defaults to `<output>.vocab.json`.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// word-smr, word-srr, phrase, song, clm or all.
    #[arg(long)]
    pub objective: Option<String>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub word_budget: Option<f64>,
    #[arg(long)]
    pub phrase_budget: Option<f64>,
    #[arg(long)]
    pub song_budget: Option<f64>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Reference corpus (ground truth).
    #[arg(long)]
    pub reference: PathBuf,
    /// Generated corpus; repeat for several runs.
    #[arg(long, required = true)]
    pub generated: Vec<PathBuf>,
    /// Row label.
    #[arg(long, default_value = "model")]
    pub label: String,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn load_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| exit::config(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| exit::config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| exit::config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Ingest(a) => commands::ingest(cfg, a),
        Command::BuildLexicon(a) => commands::build_lexicon(cfg, a),
        Command::Phrases(a) => commands::phrases(cfg, a),
        Command::MakeBatches(a) => commands::make_batches(cfg, a),
        Command::Evaluate(a) => commands::evaluate(a),
        Command::Stats(a) => commands::stats(cfg, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::code(&e))
        }
    }
}
