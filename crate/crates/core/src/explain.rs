//! Local graph explanations with HSIC Lasso.
//!
//! For a target node, the classifiable nodes of its k-hop neighborhood form
//! the sample set. Each feature column and the model's misinformation
//! probability get a centered, Frobenius-normalized Gaussian kernel over
//! those samples, and a nonnegative Lasso picks the feature kernels that
//! best reconstruct the output kernel:
//!
//! `β = argmin_{β ≥ 0} ½‖L̄ − Σ_k β_k K̄_k‖²_F + ρ Σ_k β_k`
//!
//! solved by cyclic coordinate descent.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::features::{FeatureLayout, FeatureMatrix, ModalityTag};
use crate::graph::{GraphError, SocialGraph};
use crate::math;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExplainError {
    #[error("kernel needs at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("kernel sizes differ: {expected} vs {got}")]
    KernelSizeMismatch { expected: usize, got: usize },
    #[error("neighborhood has {size} classifiable node(s); at least 3 are required")]
    NeighborhoodTooSmall { size: usize },
    #[error("coordinate descent did not converge within {sweeps} sweeps")]
    NonConvergence { sweeps: usize },
    #[error("node `{0}` is not classifiable")]
    NotClassifiable(String),
    #[error("probability vector has {got} entries, expected {expected}")]
    ProbabilityMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Centered, Frobenius-normalized kernel matrix stored as its upper
/// triangle (diagonal included), row by row. Off-diagonal entries are kept
/// multiplied by √2, which makes the Frobenius inner product of two
/// kernels a plain dot product of their storage.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredKernel {
    n: usize,
    packed: Vec<f64>,
}

impl CenteredKernel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // rows before i hold n + (n-1) + ... + (n-i+1) entries
        let start = i * self.n - i * i.saturating_sub(1) / 2;
        let v = self.packed[start + (j - i)];
        if i == j { v } else { v / core::f64::consts::SQRT_2 }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for j in 0..self.n {
                out[i * self.n + j] = self.get(i, j);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.packed.iter().all(|&v| v == 0.0)
    }

    /// Frobenius inner product `⟨self, other⟩`.
    pub fn inner(&self, other: &CenteredKernel) -> f64 {
        dot(&self.packed, &other.packed)
    }
}

/// Dot product with four independent accumulators so it vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Gaussian kernel (σ = 1) of the z-normalized `column`, double-centered and
/// scaled to unit Frobenius norm. Constant columns give the zero matrix.
pub fn centered_kernel(column: &[f64]) -> Result<CenteredKernel, ExplainError> {
    let n = column.len();
    if n < 2 {
        return Err(ExplainError::TooFewSamples(n));
    }
    let (mean, std) = math::mean_std(column.iter().copied());
    if std < 1e-12 {
        return Ok(CenteredKernel {
            n,
            packed: vec![0.0; n * (n + 1) / 2],
        });
    }
    let z: Vec<f64> = column.iter().map(|v| (v - mean) / std).collect();
    let mut packed = Vec::with_capacity(n * (n + 1) / 2);
    let mut row_sum = vec![0.0; n];
    for i in 0..n {
        packed.push(1.0);
        row_sum[i] += 1.0;
        for j in i + 1..n {
            let d = z[i] - z[j];
            let k = math::exp(-0.5 * d * d);
            packed.push(k);
            row_sum[i] += k;
            row_sum[j] += k;
        }
    }
    let row_mean: Vec<f64> = row_sum.iter().map(|s| s / n as f64).collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut sq = 0.0;
    let mut idx = 0;
    for i in 0..n {
        for j in i..n {
            let v = packed[idx] - row_mean[i] - row_mean[j] + grand;
            let v = if i == j { v } else { v * core::f64::consts::SQRT_2 };
            sq += v * v;
            packed[idx] = v;
            idx += 1;
        }
    }
    let norm = math::sqrt(sq);
    if norm < 1e-12 {
        packed.iter_mut().for_each(|v| *v = 0.0);
    } else {
        packed.iter_mut().for_each(|v| *v /= norm);
    }
    Ok(CenteredKernel { n, packed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsicSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    pub sweeps: usize,
    pub converged: bool,
}

/// Coordinate-descent state for the nonnegative HSIC Lasso.
///
/// The residual kernel `R = L̄ − Σ_k β_k K̄_k` is kept up to date, so the
/// gradient of coordinate `k` is `⟨K̄_k, R⟩ + β_k‖K̄_k‖²` and a sweep costs
/// one pass over the kernels.
pub struct HsicLasso<'k> {
    kernels: &'k [CenteredKernel],
    rho: f64,
    beta: Vec<f64>,
    corr: Vec<f64>,
    sq_norm: Vec<f64>,
    resid: Vec<f64>,
}

impl<'k> HsicLasso<'k> {
    pub fn new(kernels: &'k [CenteredKernel], output: &CenteredKernel, rho: f64) -> Result<Self, ExplainError> {
        if let Some(k) = kernels.iter().find(|k| k.n != output.n) {
            return Err(ExplainError::KernelSizeMismatch {
                expected: output.n,
                got: k.n,
            });
        }
        Ok(HsicLasso {
            kernels,
            rho,
            beta: vec![0.0; kernels.len()],
            corr: kernels.iter().map(|k| k.inner(output)).collect(),
            sq_norm: kernels.iter().map(|k| k.inner(k)).collect(),
            resid: output.packed.clone(),
        })
    }

    /// `max_k ⟨K̄_k, L̄⟩`: the smallest ρ for which β = 0 is optimal.
    pub fn rho_max(&self) -> f64 {
        self.corr.iter().copied().fold(0.0, f64::max)
    }

    pub fn with_rho(self, rho: f64) -> Self {
        HsicLasso { rho, ..self }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// One cyclic pass over all coordinates; returns the largest change.
    pub fn sweep(&mut self) -> f64 {
        let mut max_change: f64 = 0.0;
        for k in 0..self.beta.len() {
            let q = self.sq_norm[k];
            if q <= 0.0 {
                continue;
            }
            let old = self.beta[k];
            let kk = &self.kernels[k].packed;
            let grad = dot(kk, &self.resid) + old * q;
            let new = ((grad - self.rho) / q).max(0.0);
            if new != old {
                let delta = new - old;
                for (r, v) in self.resid.iter_mut().zip(kk) {
                    *r -= delta * v;
                }
                self.beta[k] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        max_change
    }

    pub fn objective(&self) -> f64 {
        let l1: f64 = self.beta.iter().sum();
        0.5 * dot(&self.resid, &self.resid) + self.rho * l1
    }

    pub fn solve(mut self, tol: f64, max_sweeps: usize) -> HsicSolution {
        let mut sweeps = 0;
        let mut converged = false;
        while sweeps < max_sweeps {
            let change = self.sweep();
            sweeps += 1;
            if change < tol {
                converged = true;
                break;
            }
        }
        HsicSolution {
            objective: self.objective(),
            beta: self.beta,
            sweeps,
            converged,
        }
    }
}

/// Solves the nonnegative HSIC Lasso to a coordinate change below `1e-8`
/// or `10⁴` sweeps, whichever comes first.
pub fn hsic_lasso(kernels: &[CenteredKernel], output: &CenteredKernel, rho: f64) -> Result<HsicSolution, ExplainError> {
    Ok(HsicLasso::new(kernels, output, rho)?.solve(1e-8, 10_000))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainConfig {
    /// Neighborhood radius in hops.
    pub k: usize,
    /// ρ as a fraction of ρ_max.
    pub rho_scale: f64,
    /// Absolute ρ; overrides `rho_scale` when set.
    pub rho: Option<f64>,
    /// Neighborhoods larger than this keep the nearest nodes (by hop
    /// distance, then id).
    pub max_samples: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig {
            k: 2,
            rho_scale: 1e-2,
            rho: None,
            max_samples: 100,
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub dim: usize,
    pub modality: ModalityTag,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphExplanation {
    pub target: String,
    pub k: usize,
    pub rho: f64,
    pub beta: Vec<f64>,
    /// Dimensions with β > 0, by decreasing β (ties by dimension).
    pub selected: Vec<SelectedFeature>,
    /// Size of the sample set, target included.
    pub n_neighbors: usize,
    pub converged: bool,
    pub sweeps: usize,
}

impl GraphExplanation {
    pub fn top_k(&self, k: usize) -> Vec<usize> {
        self.selected.iter().take(k).map(|s| s.dim).collect()
    }
}

/// Everything needed to explain nodes of one trained model.
pub struct ExplainContext<'a> {
    pub graph: &'a SocialGraph,
    pub features: &'a FeatureMatrix,
    pub x: &'a Tensor,
    /// Model probability of misinformation, per feature row.
    pub p_misinformation: &'a [f64],
    graph_to_row: BTreeMap<usize, usize>,
}

impl<'a> ExplainContext<'a> {
    pub fn new(
        graph: &'a SocialGraph,
        features: &'a FeatureMatrix,
        x: &'a Tensor,
        p_misinformation: &'a [f64],
    ) -> Result<Self, ExplainError> {
        if p_misinformation.len() != features.rows {
            return Err(ExplainError::ProbabilityMismatch {
                expected: features.rows,
                got: p_misinformation.len(),
            });
        }
        let graph_to_row = features.graph_rows.iter().enumerate().map(|(r, &g)| (g, r)).collect();
        Ok(ExplainContext {
            graph,
            features,
            x,
            p_misinformation,
            graph_to_row,
        })
    }

    /// Feature rows forming the explanation sample set of `target_row`,
    /// ascending.
    pub fn sample_rows(&self, target_row: usize, cfg: &ExplainConfig) -> Vec<usize> {
        let root = self.features.graph_rows[target_row];
        let dist = self.graph.hop_distances(root, cfg.k);
        let mut rows: Vec<(usize, usize)> = dist
            .iter()
            .filter_map(|(g, &d)| self.graph_to_row.get(g).map(|&r| (d, r)))
            .collect();
        if rows.len() > cfg.max_samples {
            rows.sort_unstable();
            rows.truncate(cfg.max_samples.max(1));
        }
        let mut out: Vec<usize> = rows.into_iter().map(|(_, r)| r).collect();
        out.sort_unstable();
        out
    }

    pub fn explain_row(&self, target_row: usize, cfg: &ExplainConfig) -> Result<GraphExplanation, ExplainError> {
        let samples = self.sample_rows(target_row, cfg);
        if samples.len() < 3 {
            return Err(ExplainError::NeighborhoodTooSmall { size: samples.len() });
        }
        let d = self.x.cols();
        let mut column = vec![0.0; samples.len()];
        let mut kernels = Vec::with_capacity(d);
        for dim in 0..d {
            for (c, &r) in column.iter_mut().zip(&samples) {
                *c = self.x.get(r, dim);
            }
            kernels.push(centered_kernel(&column)?);
        }
        let out: Vec<f64> = samples.iter().map(|&r| self.p_misinformation[r]).collect();
        let output = centered_kernel(&out)?;
        let solver = HsicLasso::new(&kernels, &output, 0.0)?;
        let rho = cfg.rho.unwrap_or_else(|| solver.rho_max() * cfg.rho_scale);
        let solver = solver.with_rho(rho);
        let sol = solver.solve(cfg.tol, cfg.max_sweeps);
        Ok(GraphExplanation {
            target: self.features.ids[target_row].clone(),
            k: cfg.k,
            rho,
            selected: select(&sol.beta, &self.features.layout),
            beta: sol.beta,
            n_neighbors: samples.len(),
            converged: sol.converged,
            sweeps: sol.sweeps,
        })
    }

    pub fn explain_node(&self, target: &str, cfg: &ExplainConfig) -> Result<GraphExplanation, ExplainError> {
        let row = self
            .features
            .row_index(target)
            .ok_or_else(|| match self.graph.index_of(target) {
                Ok(_) => ExplainError::NotClassifiable(target.into()),
                Err(e) => e.into(),
            })?;
        self.explain_row(row, cfg)
    }
}

fn select(beta: &[f64], layout: &FeatureLayout) -> Vec<SelectedFeature> {
    let mut sel: Vec<SelectedFeature> = beta
        .iter()
        .enumerate()
        .filter(|(_, &b)| b > 0.0)
        .map(|(dim, &b)| SelectedFeature {
            dim,
            modality: layout.tag(dim).unwrap_or(ModalityTag::Noise),
            beta: b,
        })
        .collect();
    sel.sort_by(|a, b| b.beta.total_cmp(&a.beta).then(a.dim.cmp(&b.dim)));
    sel
}
