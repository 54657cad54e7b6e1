use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use log::{info, warn};

use lyrmel::config::{parse_objectives, RunConfig};
use lyrmel::corpus::{read_corpus_path, write_corpus, CorpusSong};
use lyrmel::ingestion::{ingest_corpus, IngestConfig};
use lyrmel::metrics::{evaluate as evaluate_sets, evaluate_runs, MetricReport};
use lyrmel::ngram::{build_lexicon_with, corpus_hash, Family, FamilyLexicon, NGramLexicon};
use lyrmel::phrase::{recognize_phrases, PhraseConfig};
use lyrmel::pretraining::{make_batches as build_batches, BatchRecord};
use lyrmel::representation::AlignedSong;
use lyrmel::{Error, PronouncingDictionary};

use crate::exit;
use crate::{BatchArgs, EvalArgs, IngestArgs, LexiconArgs, PhraseArgs, PhraseFlags, StatsArgs};

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> anyhow::Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| exit::config(format!("--{name} is required (or set it under [paths])")))
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| exit::io(format!("cannot create {}: {e}", dir.display())))?;
    }
    let f = File::create(path).map_err(|e| exit::io(format!("cannot write {}: {e}", path.display())))?;
    Ok(BufWriter::new(f))
}

fn write_text(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            let mut out = create(p)?;
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn load_corpus(path: &Path) -> anyhow::Result<Vec<CorpusSong>> {
    if !path.is_file() {
        return Err(exit::io(format!("corpus {} not found", path.display())));
    }
    read_corpus_path(path).with_context(|| format!("reading {}", path.display()))
}

fn apply_phrase_flags(cfg: &mut PhraseConfig, f: &PhraseFlags) {
    if let Some(v) = f.long_note_ticks {
        cfg.long_note_ticks = v;
    }
    if let Some(v) = f.rest_gap_ticks {
        cfg.rest_gap_ticks = v;
    }
    if let Some(v) = f.duration_gap {
        cfg.duration_gap = v;
    }
    if let Some(v) = f.min_punct_ratio {
        cfg.min_punct_ratio = v;
    }
}

fn ingest_config(cfg: &RunConfig, a: &IngestArgs) -> IngestConfig {
    let mut ic = cfg.ingest;
    let l = &mut ic.lyrics;
    if let Some(v) = a.max_repetition {
        l.max_repetition = v;
    }
    if let Some(v) = a.max_long_short {
        l.max_long_short = v;
    }
    if let Some(v) = a.short_max_letters {
        l.short_max_letters = v;
    }
    if let Some(v) = a.long_min_letters {
        l.long_min_letters = v;
    }
    let m = &mut ic.melody;
    if let Some(v) = a.min_bars {
        m.min_bars = v;
    }
    if let Some(v) = a.pitch_low {
        m.pitch_low = v;
    }
    if let Some(v) = a.pitch_high {
        m.pitch_high = v;
    }
    apply_phrase_flags(&mut ic.phrase, &a.phrase);
    ic
}

fn is_midi(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("mid") || e.eq_ignore_ascii_case("midi"))
}

pub fn ingest(cfg: RunConfig, a: IngestArgs) -> anyhow::Result<()> {
    let input = required(a.input.clone(), &cfg.paths.input_dir, "input")?;
    let dict_path = required(a.dict.clone(), &cfg.paths.dictionary, "dict")?;
    let output = required(a.output.clone(), &cfg.paths.corpus, "output")?;
    let report_path = a.report.clone().or_else(|| cfg.paths.report.clone());
    let ic = ingest_config(&cfg, &a);

    let entries = std::fs::read_dir(&input).map_err(|e| exit::io(format!("cannot read {}: {e}", input.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && is_midi(p))
        .collect();
    files.sort();
    let dict = PronouncingDictionary::from_path(&dict_path).with_context(|| format!("reading {}", dict_path.display()))?;
    let inputs: Vec<(String, Vec<u8>)> = files
        .iter()
        .map(|p| {
            let id = p.file_name().unwrap().to_string_lossy().into_owned();
            std::fs::read(p)
                .map(|b| (id, b))
                .map_err(|e| exit::io(format!("cannot read {}: {e}", p.display())))
        })
        .collect::<anyhow::Result<_>>()?;

    let t = Instant::now();
    let outcome = ingest_corpus(&inputs, &dict, &ic);
    info!("ingested {} files in {:.2?}", inputs.len(), t.elapsed());
    for (id, r) in &outcome.rejections {
        info!("{id}: rejected: {r}");
    }
    let mut out = create(&output)?;
    write_corpus(&mut out, &outcome.songs)?;
    out.flush()?;
    let report = outcome.report.render();
    if let Some(p) = report_path {
        write_text(Some(&p), &report)?;
    }
    print!("{report}");
    Ok(())
}

pub fn build_lexicon(cfg: RunConfig, a: LexiconArgs) -> anyhow::Result<()> {
    let corpus_path = required(a.corpus, &cfg.paths.corpus, "corpus")?;
    let out_dir = required(a.out_dir, &cfg.paths.lexicon_dir, "out-dir")?;
    let mut lc = cfg.lexicon;
    if let Some(c) = a.cutoff {
        if !(c > 0.0 && c <= 1.0) {
            return Err(exit::config(format!("--cutoff must lie in (0, 1], got {c}")));
        }
        lc.cutoff = c;
    }
    let corpus = load_corpus(&corpus_path)?;
    if corpus.is_empty() {
        return Err(exit::empty(format!("corpus {} has no songs", corpus_path.display())));
    }
    let songs: Vec<AlignedSong> = corpus.into_iter().map(|c| c.song).collect();
    let t = Instant::now();
    let lexicon = build_lexicon_with(&songs, &lc)?;
    info!("scored n-grams in {:.2?}", t.elapsed());
    for family in Family::ALL {
        let lex = lexicon.family(family);
        let path = out_dir.join(format!("{}.lex", family.name()));
        let mut out = create(&path)?;
        lex.write(&mut out, &lexicon.corpus_sha256)?;
        out.flush()?;
        println!("{}\tcandidates {}\tretained {}", family.name(), lex.candidates, lex.len());
    }
    Ok(())
}

fn load_lexicon(dir: &Path) -> anyhow::Result<NGramLexicon> {
    let read = |family: Family| -> anyhow::Result<(FamilyLexicon, String)> {
        let path = dir.join(format!("{}.lex", family.name()));
        if !path.is_file() {
            return Err(Error::MissingLexicon).with_context(|| format!("{} not found", path.display()));
        }
        let f = File::open(&path)?;
        let (lex, hash) = FamilyLexicon::read(std::io::BufReader::new(f)).with_context(|| format!("reading {}", path.display()))?;
        if lex.family != family {
            return Err(exit::malformed(format!("{} holds the {} family", path.display(), lex.family.name())));
        }
        Ok((lex, hash))
    };
    let (smr, h1) = read(Family::Smr)?;
    let (srr, h2) = read(Family::Srr)?;
    if h1 != h2 {
        warn!("smr and srr lexicons were built from different corpora");
    }
    Ok(NGramLexicon { corpus_sha256: h1, smr, srr })
}

pub fn make_batches(cfg: RunConfig, a: BatchArgs) -> anyhow::Result<()> {
    let corpus_path = required(a.corpus, &cfg.paths.corpus, "corpus")?;
    let output = required(a.output, &cfg.paths.batches, "output")?;
    let vocab_path = a.vocab.unwrap_or_else(|| {
        let mut s = output.clone().into_os_string();
        s.push(".vocab.json");
        PathBuf::from(s)
    });
    let selection = a.objective.unwrap_or(cfg.objective.clone());
    let objectives = parse_objectives(&selection).map_err(|e| exit::config(e.to_string()))?;
    let mut pc = cfg.pretrain;
    if let Some(v) = a.max_len {
        pc.max_len = v;
    }
    if let Some(v) = a.word_budget {
        pc.word_budget = v;
    }
    if let Some(v) = a.phrase_budget {
        pc.phrase_budget = v;
    }
    if let Some(v) = a.song_budget {
        pc.song_budget = v;
    }
    for (name, b) in [("word", pc.word_budget), ("phrase", pc.phrase_budget), ("song", pc.song_budget)] {
        if !(b > 0.0 && b <= 1.0) {
            return Err(exit::config(format!("{name} budget must lie in (0, 1], got {b}")));
        }
    }

    let corpus = load_corpus(&corpus_path)?;
    let needs_lexicon = objectives.iter().any(|o| o.family().is_some());
    let lexicon = match a.lexicon_dir.or(cfg.paths.lexicon_dir.clone()) {
        Some(dir) if needs_lexicon => Some(load_lexicon(&dir)?),
        None if needs_lexicon => return Err(Error::MissingLexicon).context("pass --lexicon-dir"),
        _ => None,
    };
    if let Some(lex) = &lexicon {
        let songs: Vec<AlignedSong> = corpus.iter().map(|c| c.song.clone()).collect();
        if corpus_hash(&songs) != lex.corpus_sha256 {
            warn!("lexicon was built from a different corpus");
        }
    }
    let t = Instant::now();
    let (records, summary, vocab) = build_batches(&corpus, lexicon.as_ref(), &objectives, &pc, cfg.seed)?;
    info!("built {} samples in {:.2?}", records.len(), t.elapsed());
    let mut out = create(&output)?;
    BatchRecord::write_jsonl(&records, &mut out)?;
    out.flush()?;
    let mut side = create(&vocab_path)?;
    serde_json::to_writer_pretty(&mut side, &vocab.tables_json())?;
    side.write_all(b"\n")?;
    side.flush()?;
    print!("{}", summary.render());
    Ok(())
}

pub fn phrases(cfg: RunConfig, a: PhraseArgs) -> anyhow::Result<()> {
    let corpus_path = required(a.corpus, &cfg.paths.corpus, "corpus")?;
    let mut pc = cfg.ingest.phrase;
    apply_phrase_flags(&mut pc, &a.phrase);
    let corpus = load_corpus(&corpus_path)?;
    let mut text = String::from("song\tsource\tphrases\tendings\n");
    for c in &corpus {
        let seg = recognize_phrases(&c.song, &pc);
        let source = match seg.source {
            lyrmel::phrase::BoundarySource::Lyrics => "lyrics",
            lyrmel::phrase::BoundarySource::Melody => "melody",
        };
        let endings: Vec<String> = seg.endings.iter().map(usize::to_string).collect();
        text.push_str(&format!("{}\t{source}\t{}\t{}\n", c.id, seg.phrase_count(), endings.join(",")));
    }
    write_text(a.output.as_deref(), &text)
}

/// Reorders `generated` to follow the reference ids.
fn pair_by_id(reference: &[CorpusSong], generated: Vec<CorpusSong>, path: &Path) -> anyhow::Result<Vec<AlignedSong>> {
    let n = generated.len();
    let mut by_id: HashMap<String, AlignedSong> = generated.into_iter().map(|c| (c.id, c.song)).collect();
    if by_id.len() != n || n != reference.len() {
        return Err(Error::InvalidInput(format!(
            "{} has {n} songs ({} distinct ids) against {} references",
            path.display(),
            by_id.len(),
            reference.len()
        ))
        .into());
    }
    reference
        .iter()
        .map(|r| {
            by_id
                .remove(&r.id)
                .ok_or_else(|| Error::InvalidInput(format!("{} has no song {:?}", path.display(), r.id)).into())
        })
        .collect()
}

pub fn evaluate(a: EvalArgs) -> anyhow::Result<()> {
    let reference = load_corpus(&a.reference)?;
    if reference.is_empty() {
        return Err(exit::empty(format!("reference corpus {} has no songs", a.reference.display())));
    }
    let mut runs = Vec::new();
    for path in &a.generated {
        let generated = load_corpus(path)?;
        if generated.is_empty() {
            return Err(exit::empty(format!("generated corpus {} has no songs", path.display())));
        }
        runs.push(pair_by_id(&reference, generated, path)?);
    }
    let ref_songs: Vec<AlignedSong> = reference.into_iter().map(|c| c.song).collect();
    let report: MetricReport = if runs.len() == 1 {
        evaluate_sets(&runs[0], &ref_songs)?
    } else {
        evaluate_runs(&runs, &ref_songs)?
    };
    let text = format!("{}\n{}\n", MetricReport::table_header(), report.table_row(&a.label));
    write_text(a.output.as_deref(), &text)
}

pub fn stats(cfg: RunConfig, a: StatsArgs) -> anyhow::Result<()> {
    let corpus_path = required(a.corpus, &cfg.paths.corpus, "corpus")?;
    let corpus = load_corpus(&corpus_path)?;
    let songs = corpus.len();
    let words: usize = corpus.iter().map(|c| c.song.words.len()).sum();
    let notes: usize = corpus.iter().map(|c| c.song.notes.len()).sum();
    let phrases: usize = corpus.iter().map(|c| c.song.phrase_count()).sum();
    let bars: usize = corpus.iter().map(|c| c.song.bar_count()).sum();
    let multi: usize = corpus
        .iter()
        .map(|c| c.song.word_note_ranges().iter().filter(|r| r.len() > 1).count())
        .sum();
    let mut tempo: BTreeMap<usize, (&str, usize)> = BTreeMap::new();
    for c in &corpus {
        if let Some(n) = c.song.notes.first() {
            tempo.entry(n.tempo.index()).or_insert((n.tempo.name(), 0)).1 += 1;
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut text = format!(
        "songs\t{songs}\nwords\t{words}\nnotes\t{notes}\nphrases\t{phrases}\nbars\t{bars}\n\
         notes_per_song\t{:.2}\nnotes_per_word\t{:.3}\nmulti_note_words\t{:.3}\nwords_per_phrase\t{:.2}\n",
        ratio(notes, songs),
        ratio(notes, words),
        ratio(multi, words),
        ratio(words, phrases),
    );
    for (name, n) in tempo.values() {
        text.push_str(&format!("tempo.{name}\t{n}\n"));
    }
    write_text(a.output.as_deref(), &text)
}
