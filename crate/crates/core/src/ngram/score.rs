use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Collocation t-score of an observed pattern against the independence
/// null `p0 = prod(unigram_probs)`.
///
/// When the pattern fills every window (`p = 1`) the binomial variance
/// vanishes and `p` itself is used as the variance.
pub fn t_statistic(count: usize, total: usize, unigram_probs: &[f64]) -> Result<f64> {
    if total == 0 {
        return Err(Error::invalid("t-statistic over zero windows"));
    }
    if count == 0 || count > total {
        return Err(Error::invalid(format!("pattern count {count} outside 1..={total}")));
    }
    if let Some(p) = unigram_probs.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::invalid(format!("unigram probability {p} outside (0, 1]")));
    }
    let p_hat = count as f64 / total as f64;
    let p0: f64 = unigram_probs.iter().product();
    let mut var = p_hat * (1.0 - p_hat);
    if var == 0.0 {
        var = p_hat;
    }
    Ok((p_hat - p0) / (var / total as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Relationship {
    pub s_lm: f64,
    /// Concentration `1 - h_norm`.
    pub c: f64,
    pub h_norm: f64,
}

/// Lyric-melody relationship: mean lyric score weighted by how
/// concentrated the lyric patterns behind one melodic pattern are.
pub fn relationship_score(s_l: &[f64], p: &[f64]) -> Result<Relationship> {
    if s_l.is_empty() || s_l.len() != p.len() {
        return Err(Error::invalid(format!(
            "need equal non-empty score and probability lists, got {} and {}",
            s_l.len(),
            p.len()
        )));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || p.iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        return Err(Error::invalid(format!("probabilities must form a distribution (sum {sum})")));
    }
    let m = s_l.len();
    if m == 1 {
        return Ok(Relationship { s_lm: s_l[0], c: 1.0, h_norm: 0.0 });
    }
    let h: f64 = -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>();
    let h_norm = (h / (m as f64).ln()).clamp(0.0, 1.0);
    let c = 1.0 - h_norm;
    let mean = s_l.iter().sum::<f64>() / m as f64;
    Ok(Relationship { s_lm: c * mean, c, h_norm })
}

/// Score of one melodic pattern.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NGramScore {
    /// Mean lyric t-score over the associated lyric patterns.
    pub s_l: f64,
    pub s_m: f64,
    pub s_lm: f64,
    pub s: f64,
    pub c: f64,
    pub h_norm: f64,
    /// Number of distinct associated lyric patterns.
    pub m: usize,
}
