use serde::{Deserialize, Serialize};

use super::PretrainSample;
use crate::error::{Error, Result};

/// Square allow/forbid matrix over sample positions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttentionMaskSpec {
    pub size: usize,
    allowed: Vec<bool>,
}

impl AttentionMaskSpec {
    /// Bidirectional over the first `a + b` positions, causal (self
    /// included) over the last `c`.
    pub fn from_parts(a: usize, b: usize, c: usize) -> Self {
        let ab = a + b;
        let size = ab + c;
        let mut allowed = vec![false; size * size];
        for i in 0..size {
            let limit = if i < ab { ab } else { i + 1 };
            allowed[i * size..i * size + limit].fill(true);
        }
        AttentionMaskSpec { size, allowed }
    }

    pub fn from_matrix(rows: &[Vec<bool>]) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::invalid("attention mask must be square"));
        }
        Ok(AttentionMaskSpec { size, allowed: rows.concat() })
    }

    pub fn allows(&self, row: usize, col: usize) -> bool {
        self.allowed[row * self.size + col]
    }

    /// Additive bias: 0 where allowed, negative infinity elsewhere.
    pub fn bias(&self, row: usize, col: usize) -> f64 {
        if self.allows(row, col) {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn row(&self, row: usize) -> &[bool] {
        &self.allowed[row * self.size..(row + 1) * self.size]
    }
}

pub fn attention_mask(sample: &PretrainSample) -> AttentionMaskSpec {
    AttentionMaskSpec::from_parts(sample.part_a, sample.part_b, sample.part_c)
}

/// Row-wise softmax of `scores + bias`; forbidden entries get exactly 0.
pub fn masked_attention_weights(scores: &[Vec<f64>], mask: &AttentionMaskSpec) -> Result<Vec<Vec<f64>>> {
    if scores.len() != mask.size || scores.iter().any(|r| r.len() != mask.size) {
        return Err(Error::invalid(format!("score matrix does not match a {0}x{0} mask", mask.size)));
    }
    scores
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let allowed = mask.row(i);
            let max = row
                .iter()
                .zip(allowed)
                .filter(|(_, &a)| a)
                .map(|(&s, _)| s)
                .fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return Err(Error::InvalidMask(i));
            }
            let mut w: Vec<f64> = row
                .iter()
                .zip(allowed)
                .map(|(&s, &a)| if a { (s - max).exp() } else { 0.0 })
                .collect();
            let sum: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= sum);
            Ok(w)
        })
        .collect()
}

/// Negative log-likelihood of the targets of `sample` given one
/// probability per target position.
pub fn span_nll(probs: &[f64], sample: &PretrainSample) -> Result<f64> {
    let targets = sample.target_positions().len();
    if probs.len() != targets {
        return Err(Error::invalid(format!("{} probabilities for {targets} targets", probs.len())));
    }
    if let Some(p) = probs.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::invalid(format!("probability {p} outside (0, 1]")));
    }
    Ok(-probs.iter().map(|p| p.ln()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn two_two_two() {
        let m = AttentionMaskSpec::from_parts(2, 2, 2);
        for r in 0..4 {
            assert_eq!(m.row(r), &[true, true, true, true, false, false]);
        }
        assert_eq!(m.row(4), &[true, true, true, true, true, false]);
        assert_eq!(m.row(5), &[true; 6]);
        assert_eq!(m.bias(0, 5), f64::NEG_INFINITY);
        assert_eq!(m.bias(5, 0), 0.0);
    }

    #[test]
    fn no_part_c_is_bidirectional() {
        let m = AttentionMaskSpec::from_parts(3, 2, 0);
        assert!((0..5).all(|r| m.row(r).iter().all(|&a| a)));
    }

    #[test]
    fn softmax_cases() {
        let scores = vec![vec![1.0, 2.0, 3.0]; 3];
        let all = AttentionMaskSpec::from_parts(3, 0, 0);
        let w = masked_attention_weights(&scores, &all).unwrap();
        let z: f64 = [1f64, 2.0, 3.0].iter().map(|s| s.exp()).sum();
        assert_abs_diff_eq!(w[0][2], 3f64.exp() / z, epsilon = 1e-15);

        let causal = AttentionMaskSpec::from_parts(0, 0, 3);
        let w = masked_attention_weights(&scores, &causal).unwrap();
        assert_eq!(w[0], vec![1.0, 0.0, 0.0]);

        let uniform = vec![vec![0.5; 5]; 5];
        let mut rows = vec![vec![false; 5]; 5];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = true;
            r[(i + 1) % 5] = true;
            r[(i + 2) % 5] = true;
        }
        let m = AttentionMaskSpec::from_matrix(&rows).unwrap();
        let w = masked_attention_weights(&uniform, &m).unwrap();
        assert_abs_diff_eq!(w[0][1], 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(w[0][3], 0.0);
    }

    #[test]
    fn fully_forbidden_row() {
        let m = AttentionMaskSpec::from_matrix(&[vec![true, false], vec![false, false]]).unwrap();
        assert!(matches!(masked_attention_weights(&[vec![0.0; 2], vec![0.0; 2]], &m), Err(Error::InvalidMask(1))));
    }
}
