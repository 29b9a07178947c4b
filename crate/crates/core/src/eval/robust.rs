//! Noise-injection robustness protocol: how often explanations select
//! features that are pure noise.
//!
//! For each round and proportion `p`, `round(total_dim · p)` noise columns
//! are appended to every row before normalization, the classifier is
//! retrained, and a seeded sample of test nodes is explained. Retraining
//! lives with the pipeline; this module holds the bookkeeping.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::explain::GraphExplanation;
use crate::features::{FeatureLayout, ModalityTag};
use crate::math;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustConfig {
    pub p_list: Vec<f64>,
    pub rounds: usize,
    pub seed: u64,
    /// Test nodes explained per round.
    pub n_explain: usize,
    /// Fill noise columns with a constant instead of Gaussian draws.
    pub constant_noise: bool,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            p_list: vec![0.01, 0.1, 0.25, 0.5, 0.75, 1.0],
            rounds: 25,
            seed: 0,
            n_explain: 20,
            constant_noise: false,
        }
    }
}

impl RobustConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if let Some(p) = self.p_list.iter().find(|&&p| !(p > 0.0 && p <= 1.0)) {
            return Err(EvalError::InvalidParameter(alloc::format!("p must be in (0,1], got {p}")));
        }
        if self.rounds == 0 || self.n_explain == 0 {
            return Err(EvalError::InvalidParameter("rounds and n_explain must be positive".into()));
        }
        Ok(())
    }

    /// Seed of round `round`: retraining, noise and node sample all derive
    /// from it.
    pub fn round_seed(&self, round: usize) -> u64 {
        self.seed.wrapping_add(round as u64)
    }
}

pub fn noise_count(total_dim: usize, p: f64) -> usize {
    math::round(total_dim as f64 * p) as usize
}

/// `n` rows drawn without replacement from `rows` (all of them if fewer),
/// ascending.
pub fn pick_targets(rows: &[usize], n: usize, seed: u64) -> Result<Vec<usize>, EvalError> {
    if rows.is_empty() {
        return Err(EvalError::NoTestNodes);
    }
    let mut v = rows.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v.truncate(n);
    v.sort_unstable();
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeNoise {
    pub target: String,
    pub n_selected: usize,
    pub n_noisy: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustRound {
    pub round: usize,
    pub p: f64,
    pub n_noise: usize,
    pub per_node: Vec<NodeNoise>,
    /// `100 · Σ noisy / Σ selected` over the round's explanations; 0 when
    /// nothing was selected.
    pub percentage: f64,
}

impl RobustRound {
    pub fn from_explanations(round: usize, p: f64, layout: &FeatureLayout, explanations: &[GraphExplanation]) -> Self {
        let per_node: Vec<NodeNoise> = explanations
            .iter()
            .map(|e| NodeNoise {
                target: e.target.clone(),
                n_selected: e.selected.len(),
                n_noisy: e.selected.iter().filter(|s| s.modality == ModalityTag::Noise).count(),
            })
            .collect();
        let sel: usize = per_node.iter().map(|n| n.n_selected).sum();
        let noisy: usize = per_node.iter().map(|n| n.n_noisy).sum();
        RobustRound {
            round,
            p,
            n_noise: layout.noise.len(),
            per_node,
            percentage: if sel == 0 { 0.0 } else { 100.0 * noisy as f64 / sel as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    /// Noisy features selected by one explanation.
    pub noisy: usize,
    /// Explanations with that many.
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PSummary {
    pub p: f64,
    pub n_noise: usize,
    pub histogram: Vec<HistogramBin>,
    /// Mean of the per-round percentages.
    pub mean_percentage: f64,
    /// Share of explanations that selected no noise at all.
    pub zero_noise_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustReport {
    pub rounds: usize,
    pub seed: u64,
    pub n_explain: usize,
    pub constant_noise: bool,
    pub per_p: Vec<PSummary>,
    pub round_results: Vec<RobustRound>,
}

pub fn aggregate(cfg: &RobustConfig, mut rounds: Vec<RobustRound>) -> RobustReport {
    rounds.sort_by(|a, b| a.p.total_cmp(&b.p).then(a.round.cmp(&b.round)));
    let per_p = cfg
        .p_list
        .iter()
        .map(|&p| {
            let mine: Vec<&RobustRound> = rounds.iter().filter(|r| r.p == p).collect();
            let mut hist = BTreeMap::new();
            let mut zero = 0;
            let mut total = 0;
            for n in mine.iter().flat_map(|r| &r.per_node) {
                *hist.entry(n.n_noisy).or_insert(0) += 1;
                total += 1;
                if n.n_noisy == 0 {
                    zero += 1;
                }
            }
            let (mean_percentage, _) = math::mean_std(mine.iter().map(|r| r.percentage));
            PSummary {
                p,
                n_noise: mine.first().map_or(0, |r| r.n_noise),
                histogram: hist.into_iter().map(|(noisy, count)| HistogramBin { noisy, count }).collect(),
                mean_percentage,
                zero_noise_fraction: if total == 0 { 0.0 } else { zero as f64 / total as f64 },
            }
        })
        .collect();
    RobustReport {
        rounds: cfg.rounds,
        seed: cfg.seed,
        n_explain: cfg.n_explain,
        constant_noise: cfg.constant_noise,
        per_p,
        round_results: rounds,
    }
}
