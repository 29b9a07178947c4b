//! F1 with a percentile bootstrap interval.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::graph::Label;
use crate::math;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    /// Counts with `positive` as the positive class.
    pub fn count<T: PartialEq + Copy>(preds: &[T], golds: &[T], positive: T) -> Self {
        let mut c = Confusion::default();
        for (&p, &g) in preds.iter().zip(golds) {
            match (p == positive, g == positive) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    /// `2tp / (2tp + fp + fn)`, zero when there are no positives at all.
    pub fn f1(&self) -> f64 {
        let denom = 2 * self.tp + self.fp + self.fn_;
        if denom == 0 {
            0.0
        } else {
            2.0 * self.tp as f64 / denom as f64
        }
    }
}

/// F1 with misinformation as the positive class.
pub fn f1_score(preds: &[Label], golds: &[Label]) -> f64 {
    Confusion::count(preds, golds, Label::Misinformation).f1()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub point_f1: f64,
    pub mean_f1: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub half_width: f64,
    #[serde(rename = "B")]
    pub b: usize,
    pub seed: u64,
}

/// Resamples the prediction/gold pairs `b` times with replacement. Resample
/// indices come from `ChaCha8Rng::seed_from_u64(seed)`, `n` draws of
/// `random_range(0..n)` per resample. The interval endpoints are the order
/// statistics at `⌊0.025 b⌋` and `⌈0.975 b⌉ − 1`.
pub fn bootstrap_f1(preds: &[Label], golds: &[Label], b: usize, seed: u64) -> Result<BootstrapReport, EvalError> {
    if preds.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    if b == 0 {
        return Err(EvalError::InvalidParameter("B must be at least 1".into()));
    }
    let n = preds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(b);
    for _ in 0..b {
        let mut c = Confusion::default();
        for _ in 0..n {
            let i = rng.random_range(0..n);
            let one = Confusion::count(&preds[i..=i], &golds[i..=i], Label::Misinformation);
            c.tp += one.tp;
            c.fp += one.fp;
            c.fn_ += one.fn_;
            c.tn += one.tn;
        }
        scores.push(c.f1());
    }
    let mean_f1 = scores.iter().sum::<f64>() / b as f64;
    scores.sort_by(f64::total_cmp);
    let lo = math::floor(0.025 * b as f64) as usize;
    let hi = (math::ceil(0.975 * b as f64) as usize).saturating_sub(1).max(lo);
    let (ci_low, ci_high) = (scores[lo.min(b - 1)], scores[hi.min(b - 1)]);
    Ok(BootstrapReport {
        point_f1: f1_score(preds, golds),
        mean_f1,
        ci_low,
        ci_high,
        half_width: (ci_high - ci_low) / 2.0,
        b,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Label::{Fact as F, Misinformation as M};

    #[test]
    fn f1_by_hand() {
        // tp=2 fp=1 fn=1
        assert!((f1_score(&[M, M, M, F, F], &[M, M, F, M, F]) - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(f1_score(&[F, F], &[F, F]), 0.0);
    }

    #[test]
    fn all_correct_gives_degenerate_interval() {
        let g = [M, F, M, F, F, M];
        let r = bootstrap_f1(&g, &g, 1000, 4).unwrap();
        assert_eq!(r.point_f1, 1.0);
        // some resamples may lack positives and score 0, but the 2.5%
        // quantile of 1000 draws of 6 items with 3 positives is still 1
        assert_eq!((r.ci_low, r.ci_high), (1.0, 1.0));
    }

    #[test]
    fn errors() {
        assert_eq!(
            bootstrap_f1(&[M], &[], 10, 0).unwrap_err(),
            EvalError::LengthMismatch { preds: 1, golds: 0 }
        );
        assert_eq!(bootstrap_f1(&[], &[], 10, 0).unwrap_err(), EvalError::Empty);
    }
}
