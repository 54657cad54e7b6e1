use std::collections::HashMap;
use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{pattern_notes, pattern_words, relationship_score, t_statistic, Family, NGramScore, NGramStats, SongFeatures};
use crate::error::{Error, Result};
use crate::representation::AlignedSong;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconConfig {
    /// Fraction of candidates kept per family.
    pub cutoff: f64,
}

impl Default for LexiconConfig {
    fn default() -> Self {
        LexiconConfig { cutoff: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub pattern: String,
    pub n: usize,
    pub notes: usize,
    pub count: usize,
    pub score: NGramScore,
}

/// Retained melodic patterns of one family, best first.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilyLexicon {
    pub family: Family,
    pub cutoff: f64,
    pub candidates: usize,
    pub entries: Vec<LexiconEntry>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for FamilyLexicon {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family
            && self.cutoff == other.cutoff
            && self.candidates == other.candidates
            && self.entries == other.entries
    }
}

impl FamilyLexicon {
    pub fn new(family: Family, cutoff: f64, candidates: usize, entries: Vec<LexiconEntry>) -> Self {
        let index = entries.iter().enumerate().map(|(i, e)| (e.pattern.clone(), i)).collect();
        FamilyLexicon { family, cutoff, candidates, entries, index }
    }

    pub fn empty(family: Family) -> Self {
        Self::new(family, 0.0, 0, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, pattern: &str) -> bool {
        self.index.contains_key(pattern)
    }

    pub fn get(&self, pattern: &str) -> Option<&LexiconEntry> {
        self.index.get(pattern).map(|&i| &self.entries[i])
    }

    /// Writes the versioned text form: `#` header lines, a column line,
    /// then one tab-separated entry per line.
    pub fn write<W: Write>(&self, mut out: W, corpus_sha256: &str) -> Result<()> {
        writeln!(out, "# lyrmel-lexicon v1")?;
        writeln!(out, "# family: {}", self.family)?;
        writeln!(out, "# corpus-sha256: {corpus_sha256}")?;
        writeln!(out, "# cutoff: {}", self.cutoff)?;
        writeln!(out, "# candidates: {}", self.candidates)?;
        writeln!(out, "# entries: {}", self.entries.len())?;
        writeln!(out, "pattern\tn\tnotes\tcount\tm\th_norm\tc\ts_l\ts_m\ts_lm\ts")?;
        for e in &self.entries {
            let s = &e.score;
            writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                e.pattern, e.n, e.notes, e.count, s.m, s.h_norm, s.c, s.s_l, s.s_m, s.s_lm, s.s
            )?;
        }
        Ok(())
    }

    /// Parses the text form; returns the lexicon and the corpus hash.
    pub fn read<R: BufRead>(input: R) -> Result<(Self, String)> {
        let fmt_err = |line: usize, msg: String| Error::Format { what: "lexicon", line, msg };
        let mut header: HashMap<String, String> = HashMap::new();
        let mut entries = Vec::new();
        let mut saw_version = false;
        let mut saw_columns = false;
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let ln = i + 1;
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if rest == "lyrmel-lexicon v1" {
                    saw_version = true;
                } else if let Some((k, v)) = rest.split_once(':') {
                    header.insert(k.trim().to_string(), v.trim().to_string());
                }
                continue;
            }
            if !saw_version {
                return Err(fmt_err(ln, "missing version header".into()));
            }
            if !saw_columns {
                saw_columns = true;
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 11 {
                return Err(fmt_err(ln, format!("expected 11 fields, found {}", f.len())));
            }
            let int = |s: &str| s.parse::<usize>().map_err(|e| fmt_err(ln, e.to_string()));
            let real = |s: &str| s.parse::<f64>().map_err(|e| fmt_err(ln, e.to_string()));
            entries.push(LexiconEntry {
                pattern: f[0].to_string(),
                n: int(f[1])?,
                notes: int(f[2])?,
                count: int(f[3])?,
                score: NGramScore {
                    m: int(f[4])?,
                    h_norm: real(f[5])?,
                    c: real(f[6])?,
                    s_l: real(f[7])?,
                    s_m: real(f[8])?,
                    s_lm: real(f[9])?,
                    s: real(f[10])?,
                },
            });
        }
        let get = |k: &str| header.get(k).cloned().ok_or_else(|| fmt_err(0, format!("missing header field {k:?}")));
        let family: Family = get("family")?.parse()?;
        let cutoff: f64 = get("cutoff")?.parse().map_err(|_| fmt_err(0, "bad cutoff".into()))?;
        let candidates: usize = get("candidates")?.parse().map_err(|_| fmt_err(0, "bad candidate count".into()))?;
        Ok((FamilyLexicon::new(family, cutoff, candidates, entries), get("corpus-sha256")?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NGramLexicon {
    pub corpus_sha256: String,
    pub smr: FamilyLexicon,
    pub srr: FamilyLexicon,
}

impl NGramLexicon {
    pub fn family(&self, family: Family) -> &FamilyLexicon {
        match family {
            Family::Smr => &self.smr,
            Family::Srr => &self.srr,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.smr.is_empty() && self.srr.is_empty()
    }
}

/// Hex SHA-256 of the corpus in canonical JSON form.
pub fn corpus_hash(corpus: &[AlignedSong]) -> String {
    let mut h = Sha256::new();
    for song in corpus {
        h.update(serde_json::to_vec(song).expect("songs serialize"));
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Scores every melodic pattern of one family; output order follows the
/// pattern strings.
pub fn score_family(stats: &NGramStats) -> Result<Vec<LexiconEntry>> {
    let mut entries = Vec::with_capacity(stats.melodic.len());
    let mut joint = stats.joint.iter().peekable();
    for (mel, &count) in &stats.melodic {
        let n = pattern_words(mel);
        let total = stats.windows[n];
        let s_m = t_statistic(count, total, &stats.melodic_null(mel))?;
        let mut s_l = Vec::new();
        let mut p = Vec::new();
        while let Some(((m, lyr), &c)) = joint.next_if(|((m, _), _)| m == mel) {
            debug_assert_eq!(m, mel);
            s_l.push(t_statistic(stats.lyric[lyr], total, &stats.lyric_null(lyr))?);
            p.push(c as f64 / count as f64);
        }
        let rel = relationship_score(&s_l, &p)?;
        entries.push(LexiconEntry {
            pattern: mel.clone(),
            n,
            notes: pattern_notes(mel),
            count,
            score: NGramScore {
                s_l: s_l.iter().sum::<f64>() / s_l.len() as f64,
                s_m,
                s_lm: rel.s_lm,
                s: s_m + rel.s_lm,
                c: rel.c,
                h_norm: rel.h_norm,
                m: s_l.len(),
            },
        });
    }
    Ok(entries)
}

/// Best first: higher total score, then higher count, then pattern order.
pub fn rank_entries(entries: &mut [LexiconEntry]) {
    entries.sort_by(|a, b| {
        b.score
            .s
            .total_cmp(&a.score.s)
            .then(b.count.cmp(&a.count))
            .then_with(|| a.pattern.cmp(&b.pattern))
    });
}

pub fn retained_count(candidates: usize, cutoff: f64) -> usize {
    ((cutoff * candidates as f64) - 1e-9).ceil().max(0.0) as usize
}

pub fn build_lexicon(corpus: &[AlignedSong]) -> Result<NGramLexicon> {
    build_lexicon_with(corpus, &LexiconConfig::default())
}

pub fn build_lexicon_with(corpus: &[AlignedSong], cfg: &LexiconConfig) -> Result<NGramLexicon> {
    let features: Vec<SongFeatures> = corpus.par_iter().map(SongFeatures::new).collect();
    let build = |family: Family| -> Result<FamilyLexicon> {
        let stats = NGramStats::collect(&features, family);
        let mut entries = score_family(&stats)?;
        let candidates = entries.len();
        rank_entries(&mut entries);
        entries.truncate(retained_count(candidates, cfg.cutoff));
        Ok(FamilyLexicon::new(family, cfg.cutoff, candidates, entries))
    };
    let smr = build(Family::Smr)?;
    let srr = build(Family::Srr)?;
    if smr.candidates == 0 && srr.candidates == 0 {
        return Err(Error::EmptyLexicon);
    }
    Ok(NGramLexicon { corpus_sha256: corpus_hash(corpus), smr, srr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{random_song, SongShape};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus(seed: u64, n: usize) -> Vec<AlignedSong> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| random_song(&mut rng, &SongShape::default())).collect()
    }

    #[test]
    fn empty_corpus() {
        assert!(matches!(build_lexicon(&[]), Err(Error::EmptyLexicon)));
    }

    #[test]
    fn quarter_retained() {
        assert_eq!(retained_count(8, 0.25), 2);
        assert_eq!(retained_count(9, 0.25), 3);
        assert_eq!(retained_count(0, 0.25), 0);
        let lex = build_lexicon(&corpus(1, 20)).unwrap();
        for f in [&lex.smr, &lex.srr] {
            assert_eq!(f.len(), retained_count(f.candidates, 0.25));
            assert!(f.entries.windows(2).all(|w| w[0].score.s >= w[1].score.s));
            assert!(f.entries.iter().all(|e| e.score.s == e.score.s_m + e.score.s_lm));
        }
    }

    #[test]
    fn file_round_trip_is_exact() {
        let lex = build_lexicon(&corpus(2, 10)).unwrap();
        let mut buf = Vec::new();
        lex.smr.write(&mut buf, &lex.corpus_sha256).unwrap();
        let (back, hash) = FamilyLexicon::read(buf.as_slice()).unwrap();
        assert_eq!(hash, lex.corpus_sha256);
        assert_eq!(back.family, Family::Smr);
        assert_eq!(back.entries.len(), lex.smr.entries.len());
        for (a, b) in back.entries.iter().zip(&lex.smr.entries) {
            assert_eq!(a.pattern, b.pattern);
            assert_eq!(a.score.s, b.score.s);
            assert_eq!(a.score.s_lm, b.score.s_lm);
        }
        let mut again = Vec::new();
        back.write(&mut again, &hash).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn deterministic_bytes() {
        let c = corpus(3, 15);
        let a = build_lexicon(&c).unwrap();
        let b = build_lexicon(&c).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.srr.write(&mut x, &a.corpus_sha256).unwrap();
        b.srr.write(&mut y, &b.corpus_sha256).unwrap();
        assert_eq!(x, y);
    }
}
