//! Simulated-user trustworthiness protocol.
//!
//! Each round marks a random subset `U` of the feature dimensions as
//! untrustworthy. The oracle calls a prediction untrustworthy when zeroing
//! `U` in the node's row changes the model's label. The simulated user only
//! sees the top-K explanation `E_K` and a ridge surrogate fitted on the
//! explanation neighborhood; it calls the prediction untrustworthy when
//! zeroing `E_K ∩ U` flips the surrogate's 0.5-thresholded decision. The
//! user is scored against the oracle by F1 with "trustworthy" as the
//! positive class.
//!
//! Explanations and surrogates do not depend on `U`, so they are computed
//! once per target ([`prepare_target`]) and shared by all rounds.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bootstrap::Confusion;
use super::EvalError;
use crate::explain::{ExplainConfig, ExplainContext};
use crate::features::FeatureMatrix;
use crate::gat::{GatGraph, GatModel, Prediction};
use crate::graph::{Label, SocialGraph};
use crate::linalg::{self, LinearModel};
use crate::math;
use crate::tensor::Tensor;
use crate::Error;

/// What the simulated user gets to see for one target.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalExplanation {
    /// Dimensions by decreasing importance.
    pub ranked: Vec<usize>,
    pub target_row: Vec<f64>,
    /// Neighborhood rows the surrogate is fitted on.
    pub samples: Vec<Vec<f64>>,
    /// Model probability of misinformation for each sample.
    pub probs: Vec<f64>,
}

/// A classifier plus explainer under evaluation. Targets are opaque
/// indices `0..n_targets()`.
pub trait TrustSubject {
    fn n_dims(&self) -> usize;
    fn n_targets(&self) -> usize;
    fn target_name(&self, target: usize) -> String;
    /// Model label with nothing removed.
    fn label(&self, target: usize) -> Result<Label, Error>;
    /// Model label after zeroing `zero_dims` in the target's row.
    fn masked_label(&self, target: usize, zero_dims: &[usize]) -> Result<Label, Error>;
    fn local_explanation(&self, target: usize) -> Result<LocalExplanation, Error>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustConfig {
    pub k_list: Vec<usize>,
    pub rounds: usize,
    /// Fraction of dimensions marked untrustworthy per round.
    pub frac: f64,
    pub seed: u64,
    /// Ridge penalty of the surrogate.
    pub lambda: f64,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            k_list: vec![1, 2, 3, 5, 10],
            rounds: 25,
            frac: 0.3,
            seed: 0,
            lambda: 1e-3,
        }
    }
}

impl TrustConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if !(self.frac > 0.0 && self.frac < 1.0) {
            return Err(EvalError::InvalidParameter(alloc::format!("frac must be in (0,1), got {}", self.frac)));
        }
        if self.rounds == 0 {
            return Err(EvalError::InvalidParameter("rounds must be at least 1".into()));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return Err(EvalError::InvalidParameter("K list must be non-empty and positive".into()));
        }
        Ok(())
    }
}

/// Per-target state shared by all rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedTarget {
    pub name: String,
    pub label: Label,
    pub ranked: Vec<usize>,
    pub row: Vec<f64>,
    pub surrogate: LinearModel,
}

fn surrogate_label(m: &LinearModel, row: &[f64]) -> Label {
    // same tie rule as the classifier: p = 0.5 counts as misinformation
    if m.predict(row) >= 0.5 {
        Label::Misinformation
    } else {
        Label::Fact
    }
}

pub fn prepare_target<S: TrustSubject + ?Sized>(subject: &S, target: usize, lambda: f64) -> Result<PreparedTarget, Error> {
    let label = subject.label(target)?;
    let ex = subject.local_explanation(target)?;
    let name = subject.target_name(target);
    let surrogate = linalg::ridge(&ex.samples, &ex.probs, lambda).ok_or_else(|| EvalError::SurrogateFailed(name.clone()))?;
    Ok(PreparedTarget {
        name,
        label,
        ranked: ex.ranked,
        row: ex.target_row,
        surrogate,
    })
}

/// The untrustworthy set of one round: `round(frac · n_dims)` distinct
/// dimensions from `ChaCha8Rng::seed_from_u64(seed)`, ascending.
pub fn untrustworthy_set(n_dims: usize, frac: f64, seed: u64) -> Vec<usize> {
    let m = (math::round(frac * n_dims as f64) as usize).min(n_dims);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims: Vec<usize> = (0..n_dims).collect();
    dims.shuffle(&mut rng);
    dims.truncate(m);
    dims.sort_unstable();
    dims
}

/// The simulated user's verdict: `true` means untrustworthy.
pub fn user_flags(t: &PreparedTarget, k: usize, untrusted: &[usize]) -> bool {
    let removed: Vec<usize> = t
        .ranked
        .iter()
        .take(k)
        .copied()
        .filter(|d| untrusted.binary_search(d).is_ok())
        .collect();
    if removed.is_empty() {
        return false;
    }
    let mut row = t.row.clone();
    for &d in &removed {
        row[d] = 0.0;
    }
    surrogate_label(&t.surrogate, &t.row) != surrogate_label(&t.surrogate, &row)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KRound {
    pub k: usize,
    pub confusion: Confusion,
    /// `None` when undefined: no target is trustworthy by either the oracle
    /// or the user.
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRound {
    pub round: usize,
    pub seed: u64,
    pub n_untrustworthy_dims: usize,
    /// Targets the oracle labels untrustworthy.
    pub oracle_untrustworthy: usize,
    pub per_k: Vec<KRound>,
}

/// Runs round `round` with seed `cfg.seed + round`.
pub fn run_round<S: TrustSubject + ?Sized>(
    subject: &S,
    prepared: &[PreparedTarget],
    cfg: &TrustConfig,
    round: usize,
) -> Result<TrustRound, Error> {
    let seed = cfg.seed.wrapping_add(round as u64);
    let untrusted = untrustworthy_set(subject.n_dims(), cfg.frac, seed);
    // true = trustworthy, the positive class
    let mut oracle = Vec::with_capacity(prepared.len());
    for (i, t) in prepared.iter().enumerate() {
        oracle.push(subject.masked_label(i, &untrusted)? == t.label);
    }
    let n_bad = oracle.iter().filter(|&&o| !o).count();
    let per_k = cfg
        .k_list
        .iter()
        .map(|&k| {
            let user: Vec<bool> = prepared.iter().map(|t| !user_flags(t, k, &untrusted)).collect();
            let confusion = Confusion::count(&user, &oracle, true);
            let defined = confusion.tp + confusion.fp + confusion.fn_ > 0;
            KRound {
                k,
                f1: defined.then(|| confusion.f1()),
                confusion,
            }
        })
        .collect();
    Ok(TrustRound {
        round,
        seed,
        n_untrustworthy_dims: untrusted.len(),
        oracle_untrustworthy: n_bad,
        per_k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSummary {
    pub k: usize,
    /// `None` when F1 was undefined in every round.
    pub mean_f1: Option<f64>,
    /// Population standard deviation over the rounds with a defined F1.
    pub std_f1: Option<f64>,
    pub n_rounds: usize,
    /// Rounds left out because their F1 was undefined.
    pub undefined_rounds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustReport {
    pub rounds: usize,
    pub untrustworthy_frac: f64,
    pub seed: u64,
    pub n_targets: usize,
    pub summary: Vec<KSummary>,
    pub round_results: Vec<TrustRound>,
}

pub fn aggregate(cfg: &TrustConfig, n_targets: usize, mut rounds: Vec<TrustRound>) -> TrustReport {
    rounds.sort_by_key(|r| r.round);
    let summary = cfg
        .k_list
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let f1s: Vec<f64> = rounds.iter().filter_map(|r| r.per_k[i].f1).collect();
            let (mean_f1, std_f1) = match f1s.is_empty() {
                true => (None, None),
                false => {
                    let (m, sd) = math::mean_std(f1s.iter().copied());
                    (Some(m), Some(sd))
                }
            };
            KSummary {
                k,
                mean_f1,
                std_f1,
                n_rounds: f1s.len(),
                undefined_rounds: rounds.iter().filter(|r| r.per_k[i].f1.is_none()).map(|r| r.round).collect(),
            }
        })
        .collect();
    TrustReport {
        rounds: cfg.rounds,
        untrustworthy_frac: cfg.frac,
        seed: cfg.seed,
        n_targets,
        summary,
        round_results: rounds,
    }
}

/// Sequential driver: prepares every target, runs all rounds, aggregates.
pub fn trustworthiness_protocol<S: TrustSubject + ?Sized>(subject: &S, cfg: &TrustConfig) -> Result<TrustReport, Error> {
    cfg.validate()?;
    let prepared = (0..subject.n_targets())
        .map(|t| prepare_target(subject, t, cfg.lambda))
        .collect::<Result<Vec<_>, _>>()?;
    let rounds = (0..cfg.rounds)
        .map(|r| run_round(subject, &prepared, cfg, r))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(aggregate(cfg, prepared.len(), rounds))
}

/// A trained graph classifier explained by HSIC Lasso.
pub struct GatSubject<'a> {
    pub graph: &'a SocialGraph,
    pub features: &'a FeatureMatrix,
    pub gat_graph: &'a GatGraph,
    pub x: &'a Tensor,
    pub model: &'a GatModel,
    pub explain: ExplainConfig,
    /// Feature rows to evaluate.
    pub rows: Vec<usize>,
    /// Unmasked predictions for every row.
    pub predictions: Vec<Prediction>,
    p_mis: Vec<f64>,
}

impl<'a> GatSubject<'a> {
    pub fn new(
        graph: &'a SocialGraph,
        features: &'a FeatureMatrix,
        gat_graph: &'a GatGraph,
        x: &'a Tensor,
        model: &'a GatModel,
        explain: ExplainConfig,
        rows: Vec<usize>,
    ) -> Result<Self, Error> {
        let predictions = model.predict(gat_graph, x)?;
        let p_mis = predictions.iter().map(|p| p.p_misinformation()).collect();
        Ok(GatSubject {
            graph,
            features,
            gat_graph,
            x,
            model,
            explain,
            rows,
            predictions,
            p_mis,
        })
    }
}

impl TrustSubject for GatSubject<'_> {
    fn n_dims(&self) -> usize {
        self.x.cols()
    }

    fn n_targets(&self) -> usize {
        self.rows.len()
    }

    fn target_name(&self, target: usize) -> String {
        self.features.ids[self.rows[target]].clone()
    }

    fn label(&self, target: usize) -> Result<Label, Error> {
        Ok(self.predictions[self.rows[target]].label)
    }

    fn masked_label(&self, target: usize, zero_dims: &[usize]) -> Result<Label, Error> {
        Ok(self
            .model
            .predict_with_mask(self.gat_graph, self.x, zero_dims, self.rows[target])?
            .label)
    }

    fn local_explanation(&self, target: usize) -> Result<LocalExplanation, Error> {
        let row = self.rows[target];
        let ctx = ExplainContext::new(self.graph, self.features, self.x, &self.p_mis)?;
        let ex = ctx.explain_row(row, &self.explain)?;
        let samples = ctx.sample_rows(row, &self.explain);
        Ok(LocalExplanation {
            ranked: ex.selected.iter().map(|s| s.dim).collect(),
            target_row: self.x.row(row).to_vec(),
            probs: samples.iter().map(|&r| self.p_mis[r]).collect(),
            samples: samples.iter().map(|&r| self.x.row(r).to_vec()).collect(),
        })
    }
}

/// A world where the classifier is linear and the explainer exact, so the
/// surrogate recovers the classifier and the user must agree with the
/// oracle.
///
/// `P(misinformation | x) = 0.55 + 0.1 Σ_{k<10} x_k` over 20 dimensions;
/// dimensions 10..20 carry no weight. Target `i` has `±1` on dimension
/// `i mod 10`, zeros on the other weighted dimensions and Gaussian values on
/// the unweighted ones.
pub struct LinearWorld {
    rows: Vec<Vec<f64>>,
    seed: u64,
}

impl LinearWorld {
    pub const DIMS: usize = 20;
    pub const RELEVANT: usize = 10;
    pub const SAMPLES: usize = 30;

    pub fn new(n_targets: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = (0..n_targets)
            .map(|i| {
                let mut r = vec![0.0; Self::DIMS];
                r[i % Self::RELEVANT] = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                for v in &mut r[Self::RELEVANT..] {
                    *v = rng.random_range(-1.0..1.0);
                }
                r
            })
            .collect();
        LinearWorld { rows, seed }
    }

    pub fn prob(x: &[f64]) -> f64 {
        0.55 + 0.1 * x[..Self::RELEVANT].iter().sum::<f64>()
    }

    fn label_of(x: &[f64]) -> Label {
        Prediction::from_probs([Self::prob(x), 1.0 - Self::prob(x)]).label
    }
}

impl TrustSubject for LinearWorld {
    fn n_dims(&self) -> usize {
        Self::DIMS
    }

    fn n_targets(&self) -> usize {
        self.rows.len()
    }

    fn target_name(&self, target: usize) -> String {
        alloc::format!("lin{target}")
    }

    fn label(&self, target: usize) -> Result<Label, Error> {
        Ok(Self::label_of(&self.rows[target]))
    }

    fn masked_label(&self, target: usize, zero_dims: &[usize]) -> Result<Label, Error> {
        let mut r = self.rows[target].clone();
        for &d in zero_dims {
            r[d] = 0.0;
        }
        Ok(Self::label_of(&r))
    }

    fn local_explanation(&self, target: usize) -> Result<LocalExplanation, Error> {
        let row = self.rows[target].clone();
        // exact attribution: contribution 0.1·x_k on weighted dims
        let mut ranked: Vec<usize> = (0..Self::DIMS).collect();
        let contrib = |k: usize| if k < Self::RELEVANT { (0.1 * row[k]).abs() } else { 0.0 };
        ranked.sort_by(|&a, &b| contrib(b).total_cmp(&contrib(a)).then(a.cmp(&b)));
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (target as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let samples: Vec<Vec<f64>> = (0..Self::SAMPLES)
            .map(|_| (0..Self::DIMS).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let probs = samples.iter().map(|s| Self::prob(s)).collect();
        Ok(LocalExplanation {
            ranked,
            target_row: row,
            samples,
            probs,
        })
    }
}
