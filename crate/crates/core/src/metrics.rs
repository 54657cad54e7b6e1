//! Objective similarity metrics between generated and reference songs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representation::{duration_index, duration_values, AlignedSong, Note, TICKS_PER_BAR};

/// Series sampling step for melody distance, in ticks.
pub const MD_STEP: u32 = 10;
/// Largest word-to-notes count with its own alignment bin.
pub const ALIGNMENT_CAP: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<f64>,
    pub normalized: bool,
}

impl Histogram {
    fn from_counts(counts: Vec<usize>) -> Result<Self> {
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::invalid("histogram of no observations"));
        }
        Ok(Histogram {
            bins: counts.into_iter().map(|c| c as f64 / total as f64).collect(),
            normalized: true,
        })
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }
}

pub fn pitch_class_histogram(notes: &[Note]) -> Result<Histogram> {
    let mut counts = vec![0; 12];
    for n in notes {
        counts[(n.pitch % 12) as usize] += 1;
    }
    Histogram::from_counts(counts)
}

pub fn duration_histogram(notes: &[Note]) -> Result<Histogram> {
    let mut counts = vec![0; duration_values().len()];
    for n in notes {
        let i = duration_index(n.duration)
            .ok_or_else(|| Error::invalid(format!("duration {} is not a vocabulary value", n.duration)))?;
        counts[i] += 1;
    }
    Histogram::from_counts(counts)
}

/// IOI bins: every multiple of 30 or 40 from 0 to one bar, then overflow.
pub fn ioi_bins() -> Vec<u32> {
    (0..=TICKS_PER_BAR).filter(|t| t % 30 == 0 || t % 40 == 0).collect()
}

pub fn ioi_histogram(notes: &[Note]) -> Result<Histogram> {
    if notes.len() < 2 {
        return Err(Error::invalid("inter-onset intervals need at least two notes"));
    }
    let grid = ioi_bins();
    let mut counts = vec![0; grid.len() + 1];
    for w in notes.windows(2) {
        let ioi = w[1].onset().abs_diff(w[0].onset());
        let bin = if ioi > TICKS_PER_BAR {
            grid.len()
        } else {
            (0..grid.len())
                .min_by_key(|&i| (grid[i].abs_diff(ioi), !grid[i].is_multiple_of(30), grid[i]))
                .unwrap()
        };
        counts[bin] += 1;
    }
    Histogram::from_counts(counts)
}

/// Share of words aligned to 1, 2, ..., 16 notes, plus more than 16.
pub fn alignment_histogram(song: &AlignedSong) -> Histogram {
    let mut counts = vec![0; ALIGNMENT_CAP + 1];
    for r in song.word_note_ranges() {
        counts[r.len().clamp(1, ALIGNMENT_CAP + 1) - 1] += 1;
    }
    Histogram::from_counts(counts).expect("valid songs have words")
}

pub fn overlapped_area(h1: &Histogram, h2: &Histogram) -> Result<f64> {
    if h1.len() != h2.len() {
        return Err(Error::invalid(format!("histograms have {} and {} bins", h1.len(), h2.len())));
    }
    if !h1.normalized || !h2.normalized {
        return Err(Error::invalid("overlapped area needs normalized histograms"));
    }
    Ok(h1.bins.iter().zip(&h2.bins).map(|(a, b)| a.min(*b)).sum())
}

/// Pitch every `MD_STEP` ticks from the first onset to the last note's
/// end; a rest holds the previous pitch.
pub fn pitch_series(notes: &[Note]) -> Result<Vec<i64>> {
    if notes.is_empty() {
        return Err(Error::invalid("melody distance of an empty melody"));
    }
    let mut out = Vec::new();
    for (i, n) in notes.iter().enumerate() {
        let until = notes.get(i + 1).map_or(n.end(), |next| next.onset());
        if n.onset() % MD_STEP != 0 || !until.is_multiple_of(MD_STEP) || until <= n.onset() {
            return Err(Error::invalid(format!("note {i} does not fall on the {MD_STEP}-tick series grid")));
        }
        out.extend(std::iter::repeat_n(n.pitch as i64, ((until - n.onset()) / MD_STEP) as usize));
    }
    Ok(out)
}

/// DTW distance between two mean-centred series: the optimal path's
/// squared-difference cost divided by its length, square-rooted. Ties in
/// cost go to the shorter path.
///
/// Costs are exact: with sums `S` and lengths `L`, the centred difference
/// `(a_i - S_a/L_a) - (b_j - S_b/L_b)` is an integer over `L_a * L_b`.
pub fn series_distance(a: &[i64], b: &[i64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("melody distance of an empty series"));
    }
    let (la, lb) = (a.len() as i128, b.len() as i128);
    let (sa, sb): (i128, i128) = (a.iter().map(|&x| x as i128).sum(), b.iter().map(|&x| x as i128).sum());
    let ca: Vec<i128> = a.iter().map(|&x| lb * (la * x as i128 - sa)).collect();
    let cb: Vec<i128> = b.iter().map(|&x| la * (lb * x as i128 - sb)).collect();

    // |d| <= 2 * 127 * (128 bars of series)^2, so a whole path sum stays
    // below 2^96 and plain wrapping arithmetic is exact
    let step = |x: i128, y: i128| {
        let d = x.wrapping_sub(y);
        d.wrapping_mul(d) as u128
    };
    let extend = |(cost, len): (u128, u32), s: u128| (cost.wrapping_add(s), len + 1);

    // (cost, path length) per cell, kept for the previous and current row
    let m = b.len();
    let mut prev: Vec<(u128, u32)> = Vec::with_capacity(m);
    let mut acc = (0u128, 0u32);
    for &y in &cb {
        acc = extend(acc, step(ca[0], y));
        prev.push(acc);
    }
    let mut cur = prev.clone();
    for &x in &ca[1..] {
        cur[0] = extend(prev[0], step(x, cb[0]));
        for j in 1..m {
            let best = prev[j].min(cur[j - 1]).min(prev[j - 1]);
            cur[j] = extend(best, step(x, cb[j]));
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let (cost, len) = prev[m - 1];
    let scale = (la * lb) as f64;
    Ok((cost as f64 / len as f64).sqrt() / scale)
}

pub fn melody_distance(generated: &[Note], reference: &[Note]) -> Result<f64> {
    series_distance(&pitch_series(generated)?, &pitch_series(reference)?)
}

/// Metric values of one generated/reference pair, or an aggregate of them.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub d_a: f64,
    pub d_p: f64,
    pub d_d: f64,
    pub d_ioi: f64,
    pub md: f64,
}

impl PairMetrics {
    fn fields(&self) -> [f64; 5] {
        [self.d_a, self.d_p, self.d_d, self.d_ioi, self.md]
    }

    fn from_fields(f: [f64; 5]) -> Self {
        PairMetrics { d_a: f[0], d_p: f[1], d_d: f[2], d_ioi: f[3], md: f[4] }
    }
}

pub fn pair_metrics(generated: &AlignedSong, reference: &AlignedSong) -> Result<PairMetrics> {
    let (g, r) = (&generated.notes, &reference.notes);
    Ok(PairMetrics {
        d_a: overlapped_area(&alignment_histogram(generated), &alignment_histogram(reference))?,
        d_p: overlapped_area(&pitch_class_histogram(g)?, &pitch_class_histogram(r)?)?,
        d_d: overlapped_area(&duration_histogram(g)?, &duration_histogram(r)?)?,
        d_ioi: overlapped_area(&ioi_histogram(g)?, &ioi_histogram(r)?)?,
        md: melody_distance(g, r)?,
    })
}

/// Mean and sample standard deviation (0 for a single value) per field.
pub fn mean_std(values: &[PairMetrics]) -> (PairMetrics, PairMetrics) {
    let n = values.len() as f64;
    let mut mean = [0.0; 5];
    for v in values {
        for (m, x) in mean.iter_mut().zip(v.fields()) {
            *m += x / n;
        }
    }
    let mut var = [0.0; 5];
    if values.len() > 1 {
        for v in values {
            for k in 0..5 {
                var[k] += (v.fields()[k] - mean[k]).powi(2) / (n - 1.0);
            }
        }
    }
    (PairMetrics::from_fields(mean), PairMetrics::from_fields(var.map(f64::sqrt)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pairs: Vec<PairMetrics>,
    pub mean: PairMetrics,
    pub std: PairMetrics,
}

impl MetricReport {
    /// One table row: similarities in percent, `mean ± sd`.
    pub fn table_row(&self, label: &str) -> String {
        let pct = |m: f64, s: f64| format!("{:.2} ± {:.2}", 100.0 * m, 100.0 * s);
        format!(
            "{label} | {} | {} | {} | {} | {:.2} ± {:.2}",
            pct(self.mean.d_a, self.std.d_a),
            pct(self.mean.d_p, self.std.d_p),
            pct(self.mean.d_d, self.std.d_d),
            pct(self.mean.d_ioi, self.std.d_ioi),
            self.mean.md,
            self.std.md
        )
    }

    pub fn table_header() -> &'static str {
        "Model | D_A(%) ↑ | D_P(%) ↑ | D_D(%) ↑ | D_IOI(%) ↑ | MD ↓"
    }
}

/// Pairs songs by index; paired songs must carry the same lyrics.
pub fn evaluate(generated: &[AlignedSong], reference: &[AlignedSong]) -> Result<MetricReport> {
    if generated.is_empty() || reference.is_empty() {
        return Err(Error::invalid("evaluation needs non-empty song sets"));
    }
    if generated.len() != reference.len() {
        return Err(Error::invalid(format!(
            "{} generated songs against {} references",
            generated.len(),
            reference.len()
        )));
    }
    let mut pairs = Vec::with_capacity(generated.len());
    for (i, (g, r)) in generated.iter().zip(reference).enumerate() {
        if g.words.iter().map(|w| &w.text).ne(r.words.iter().map(|w| &w.text)) {
            return Err(Error::invalid(format!("pair {i}: generated and reference lyrics differ")));
        }
        pairs.push(pair_metrics(g, r)?);
    }
    let (mean, std) = mean_std(&pairs);
    Ok(MetricReport { pairs, mean, std })
}

/// Repeated runs against one reference set: the report's mean is the mean
/// of run means and its spread is their standard deviation.
pub fn evaluate_runs(runs: &[Vec<AlignedSong>], reference: &[AlignedSong]) -> Result<MetricReport> {
    if runs.is_empty() {
        return Err(Error::invalid("no runs to evaluate"));
    }
    let means: Vec<PairMetrics> = runs
        .iter()
        .map(|run| evaluate(run, reference).map(|r| r.mean))
        .collect::<Result<_>>()?;
    let (mean, std) = mean_std(&means);
    Ok(MetricReport { pairs: means, mean, std })
}
