//! Two-layer graph attention classifier.
//!
//! Layer 1 maps node features to a hidden representation,
//! `h_i = ELU(mean_heads Σ_j α_ij W x_j)`, with attention
//! `α_ij = softmax_j LeakyReLU(a_tᵀ W x_i + a_nᵀ W x_j)` over the node's
//! neighbors (and itself, when self-loops are on). Layer 2 is a single
//! attention head producing two logits, turned into class probabilities by
//! a softmax. Training is full-batch cross-entropy with Adam.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureMatrix;
use crate::graph::{Label, SocialGraph};
use crate::math;
use crate::tensor::{Tape, Tensor, TensorError, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GatError {
    #[error("feature matrix has {got} columns, model expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("node `{0}` has no attention neighbors (enable self-loops)")]
    EmptyNeighborhood(String),
    #[error("training split contains a single class")]
    SingleClassTrainingSet,
    #[error("need at least 2 labeled nodes, found {0}")]
    TooFewLabels(usize),
    #[error("loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("feature dimension {dim} out of range (total {total})")]
    DimOutOfRange { dim: usize, total: usize },
    #[error("model must be frozen (trained) before masked prediction")]
    NotFrozen,
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatConfig {
    pub hidden_dim: usize,
    pub heads: usize,
    pub lr: f64,
    pub epochs: usize,
    pub leaky_slope: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub seed: u64,
    pub self_loops: bool,
}

impl Default for GatConfig {
    fn default() -> Self {
        GatConfig {
            hidden_dim: 16,
            heads: 1,
            lr: 0.005,
            epochs: 400,
            leaky_slope: 0.2,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            seed: 0,
            self_loops: true,
        }
    }
}

impl GatConfig {
    pub fn validate(&self) -> Result<(), GatError> {
        if self.hidden_dim < 1 {
            return Err(GatError::InvalidConfig("hidden_dim must be >= 1"));
        }
        if self.heads < 1 {
            return Err(GatError::InvalidConfig("heads must be >= 1"));
        }
        if self.epochs < 1 {
            return Err(GatError::InvalidConfig("epochs must be >= 1"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(GatError::InvalidConfig("lr must be a finite non-negative number"));
        }
        Ok(())
    }
}

/// Attention neighborhoods in compressed form: the edges of target `i` are
/// `offsets[i]..offsets[i + 1]`, each with its source node in `src`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GatGraph {
    n: usize,
    offsets: Vec<usize>,
    src: Vec<usize>,
    dst: Vec<usize>,
}

impl GatGraph {
    /// Builds neighborhoods from per-node neighbor lists (deduplicated and
    /// sorted here), adding each node to its own list if `self_loops`.
    pub fn from_lists(lists: &[Vec<usize>], self_loops: bool) -> Self {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut src = Vec::new();
        let mut dst = Vec::new();
        offsets.push(0);
        for (i, list) in lists.iter().enumerate() {
            let mut nb: Vec<usize> = list.iter().copied().filter(|&j| j < n).collect();
            if self_loops {
                nb.push(i);
            }
            nb.sort_unstable();
            nb.dedup();
            for j in nb {
                src.push(j);
                dst.push(i);
            }
            offsets.push(src.len());
        }
        GatGraph { n, offsets, src, dst }
    }

    /// Attention graph over the rows of `fm`: two rows are neighbors when
    /// their nodes share an edge of any relation kind.
    pub fn from_social(g: &SocialGraph, fm: &FeatureMatrix, self_loops: bool) -> Result<Self, GatError> {
        Self::from_rows(g, &fm.graph_rows, self_loops)
    }

    /// Like [`GatGraph::from_social`], with row `i` standing for graph node
    /// `graph_rows[i]`.
    pub fn from_rows(g: &SocialGraph, graph_rows: &[usize], self_loops: bool) -> Result<Self, GatError> {
        let mut row_of_graph = BTreeMap::new();
        for (row, &gi) in graph_rows.iter().enumerate() {
            row_of_graph.insert(gi, row);
        }
        let lists: Vec<Vec<usize>> = graph_rows
            .iter()
            .map(|&gi| {
                g.neighbors(gi)
                    .iter()
                    .filter_map(|nb| row_of_graph.get(&nb.node).copied())
                    .collect()
            })
            .collect();
        let gg = GatGraph::from_lists(&lists, self_loops);
        if let Some(i) = (0..gg.n).find(|&i| gg.offsets[i] == gg.offsets[i + 1]) {
            return Err(GatError::EmptyNeighborhood(g.node(graph_rows[i]).id.clone()));
        }
        Ok(gg)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.src[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn edge_range(&self, i: usize) -> core::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Nodes within `hops` attention hops of `root`, ascending.
    pub fn ball(&self, root: usize, hops: usize) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        seen[root] = true;
        let mut frontier = vec![root];
        for _ in 0..hops {
            let mut next = Vec::new();
            for &u in &frontier {
                for &v in self.neighbors(u) {
                    if !seen[v] {
                        seen[v] = true;
                        next.push(v);
                    }
                }
            }
            frontier = next;
        }
        (0..self.n).filter(|&i| seen[i]).collect()
    }

    /// Subgraph induced by `nodes`, relabeled `0..nodes.len()` in the given
    /// order.
    pub fn induced(&self, nodes: &[usize]) -> GatGraph {
        let mut local = BTreeMap::new();
        for (l, &g) in nodes.iter().enumerate() {
            local.insert(g, l);
        }
        let mut offsets = vec![0];
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for (l, &g) in nodes.iter().enumerate() {
            for &j in self.neighbors(g) {
                if let Some(&lj) = local.get(&j) {
                    src.push(lj);
                    dst.push(l);
                }
            }
            offsets.push(src.len());
        }
        GatGraph {
            n: nodes.len(),
            offsets,
            src,
            dst,
        }
    }
}

/// One attention head: weights `W` and the two halves of the attention
/// vector (target half, neighbor half).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead {
    pub w: Tensor,
    pub att_target: Tensor,
    pub att_neighbor: Tensor,
}

impl AttentionHead {
    fn glorot(in_dim: usize, out_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut uniform = |rows: usize, cols: usize, fan_in: usize, fan_out: usize| {
            let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
            let data = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
            Tensor::from_vec(rows, cols, data)
        };
        let w = uniform(in_dim, out_dim, in_dim, out_dim);
        let att_target = uniform(out_dim, 1, 2 * out_dim, 1);
        let att_neighbor = uniform(out_dim, 1, 2 * out_dim, 1);
        AttentionHead {
            w,
            att_target,
            att_neighbor,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        AttentionHead {
            w: Tensor::zeros(in_dim, out_dim),
            att_target: Tensor::zeros(out_dim, 1),
            att_neighbor: Tensor::zeros(out_dim, 1),
        }
    }
}

/// Attention weights of `target` over `neighbors` for one head, computed
/// directly from the definition (no tape).
pub fn attention_coefficients(
    head: &AttentionHead,
    x: &Tensor,
    target: usize,
    neighbors: &[usize],
    leaky_slope: f64,
) -> Result<Vec<f64>, GatError> {
    if x.cols() != head.w.rows() {
        return Err(GatError::ShapeMismatch {
            expected: head.w.rows(),
            got: x.cols(),
        });
    }
    let project = |i: usize| -> Vec<f64> {
        (0..head.w.cols())
            .map(|c| (0..x.cols()).map(|k| x.get(i, k) * head.w.get(k, c)).sum())
            .collect()
    };
    let dot = |v: &[f64], a: &Tensor| -> f64 { v.iter().zip(a.as_slice()).map(|(p, q)| p * q).sum() };
    let zt = dot(&project(target), &head.att_target);
    let mut scores: Vec<f64> = neighbors
        .iter()
        .map(|&j| {
            let e = zt + dot(&project(j), &head.att_neighbor);
            if e > 0.0 {
                e
            } else {
                e * leaky_slope
            }
        })
        .collect();
    if scores.is_empty() {
        return Err(GatError::EmptyNeighborhood(alloc::format!("row {target}")));
    }
    crate::tensor::softmax_in_place(&mut scores);
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// `[P(misinformation), P(fact)]`.
    pub probs: [f64; 2],
    pub label: Label,
}

impl Prediction {
    pub fn from_probs(probs: [f64; 2]) -> Self {
        // ties go to class 0
        let label = if probs[1] > probs[0] { Label::Fact } else { Label::Misinformation };
        Prediction { probs, label }
    }

    pub fn p_misinformation(&self) -> f64 {
        self.probs[0]
    }
}

/// Result of a full forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `n × 2` class probabilities.
    pub probs: Tensor,
    /// Layer-1 attention per head, one weight per edge of the [`GatGraph`].
    pub attention1: Vec<Vec<f64>>,
    /// Layer-2 attention, one weight per edge.
    pub attention2: Vec<f64>,
}

impl ForwardOutput {
    pub fn prediction(&self, row: usize) -> Prediction {
        Prediction::from_probs([self.probs.get(row, 0), self.probs.get(row, 1)])
    }

    pub fn predictions(&self) -> Vec<Prediction> {
        (0..self.probs.rows()).map(|r| self.prediction(r)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatModel {
    pub config: GatConfig,
    pub input_dim: usize,
    pub layer1: Vec<AttentionHead>,
    pub layer2: AttentionHead,
    pub frozen: bool,
}

struct HeadVars {
    w: Var,
    at: Var,
    an: Var,
}

struct LayerOut {
    out: Var,
    alpha: Var,
}

fn attention_layer(
    tape: &mut Tape<'_>,
    graph: &GatGraph,
    x: Var,
    head: &HeadVars,
    slope: f64,
) -> Result<LayerOut, TensorError> {
    let z = tape.matmul(x, head.w)?;
    let st = tape.matmul(z, head.at)?;
    let sn = tape.matmul(z, head.an)?;
    let et = tape.gather_rows(st, &graph.dst)?;
    let en = tape.gather_rows(sn, &graph.src)?;
    let e = tape.add(et, en)?;
    let e = tape.leaky_relu(e, slope);
    let alpha = tape.segment_softmax(e, &graph.offsets)?;
    let zs = tape.gather_rows(z, &graph.src)?;
    let msg = tape.scale_rows(zs, alpha)?;
    let out = tape.scatter_add_rows(msg, &graph.dst, graph.n)?;
    Ok(LayerOut { out, alpha })
}

pub(crate) struct TapeForward {
    pub logits: Var,
    pub alpha1: Vec<Var>,
    pub alpha2: Var,
}

impl GatModel {
    /// Glorot-uniform initialization from `config.seed`.
    pub fn init(input_dim: usize, config: &GatConfig) -> Result<Self, GatError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let layer1 = (0..config.heads)
            .map(|_| AttentionHead::glorot(input_dim, config.hidden_dim, &mut rng))
            .collect();
        let layer2 = AttentionHead::glorot(config.hidden_dim, 2, &mut rng);
        Ok(GatModel {
            config: config.clone(),
            input_dim,
            layer1,
            layer2,
            frozen: false,
        })
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    fn params(&self) -> Vec<&Tensor> {
        let mut p = Vec::new();
        for h in self.layer1.iter().chain(core::iter::once(&self.layer2)) {
            p.push(&h.w);
            p.push(&h.att_target);
            p.push(&h.att_neighbor);
        }
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = Vec::new();
        for h in self.layer1.iter_mut().chain(core::iter::once(&mut self.layer2)) {
            p.push(&mut h.w);
            p.push(&mut h.att_target);
            p.push(&mut h.att_neighbor);
        }
        p
    }

    fn head_vars<'a>(tape: &mut Tape<'a>, h: &'a AttentionHead, trainable: bool) -> HeadVars {
        let put = |tape: &mut Tape<'a>, t: &'a Tensor| {
            if trainable {
                tape.leaf_ref(t)
            } else {
                tape.constant_ref(t)
            }
        };
        HeadVars {
            w: put(tape, &h.w),
            at: put(tape, &h.att_target),
            an: put(tape, &h.att_neighbor),
        }
    }

    /// Records the forward pass on `tape` for input `x` (already on the
    /// tape). Returns the logits and the attention variables.
    pub(crate) fn forward_on_tape<'a>(
        &'a self,
        tape: &mut Tape<'a>,
        graph: &GatGraph,
        x: Var,
        trainable: bool,
    ) -> Result<(TapeForward, Vec<Var>), GatError> {
        let cols = tape.value(x).cols();
        if cols != self.input_dim {
            return Err(GatError::ShapeMismatch {
                expected: self.input_dim,
                got: cols,
            });
        }
        let mut param_vars = Vec::new();
        let mut head_outs = Vec::new();
        let mut alpha1 = Vec::new();
        for h in &self.layer1 {
            let hv = Self::head_vars(tape, h, trainable);
            param_vars.extend([hv.w, hv.at, hv.an]);
            let lo = attention_layer(tape, graph, x, &hv, self.config.leaky_slope)?;
            head_outs.push(lo.out);
            alpha1.push(lo.alpha);
        }
        let mut hidden = head_outs[0];
        for &o in &head_outs[1..] {
            hidden = tape.add(hidden, o)?;
        }
        if head_outs.len() > 1 {
            hidden = tape.scalar_mul(hidden, 1.0 / head_outs.len() as f64);
        }
        let hidden = tape.elu(hidden);
        let hv = Self::head_vars(tape, &self.layer2, trainable);
        param_vars.extend([hv.w, hv.at, hv.an]);
        let lo = attention_layer(tape, graph, hidden, &hv, self.config.leaky_slope)?;
        Ok((
            TapeForward {
                logits: lo.out,
                alpha1,
                alpha2: lo.alpha,
            },
            param_vars,
        ))
    }

    /// Class probabilities and attention weights for every node.
    pub fn forward(&self, graph: &GatGraph, x: &Tensor) -> Result<ForwardOutput, GatError> {
        if x.rows() != graph.len() {
            return Err(GatError::ShapeMismatch {
                expected: graph.len(),
                got: x.rows(),
            });
        }
        let mut tape = Tape::new();
        let xv = tape.constant_ref(x);
        let (fwd, _) = self.forward_on_tape(&mut tape, graph, xv, false)?;
        let probs = tape.row_softmax(fwd.logits);
        Ok(ForwardOutput {
            probs: tape.value(probs).clone(),
            attention1: fwd.alpha1.iter().map(|&a| tape.value(a).as_slice().to_vec()).collect(),
            attention2: tape.value(fwd.alpha2).as_slice().to_vec(),
        })
    }

    pub fn predict(&self, graph: &GatGraph, x: &Tensor) -> Result<Vec<Prediction>, GatError> {
        Ok(self.forward(graph, x)?.predictions())
    }

    /// Prediction for row `target` after zeroing `zero_dims` in that row
    /// only. Evaluated on the two-hop attention ball of the target, which
    /// is all a two-layer model can see.
    pub fn predict_with_mask(
        &self,
        graph: &GatGraph,
        x: &Tensor,
        zero_dims: &[usize],
        target: usize,
    ) -> Result<Prediction, GatError> {
        if !self.frozen {
            return Err(GatError::NotFrozen);
        }
        if target >= graph.len() {
            return Err(GatError::UnknownNode(alloc::format!("row {target}")));
        }
        if let Some(&d) = zero_dims.iter().find(|&&d| d >= x.cols()) {
            return Err(GatError::DimOutOfRange { dim: d, total: x.cols() });
        }
        let ball = graph.ball(target, 2);
        let local = graph.induced(&ball);
        let mut xl = x.select_rows(&ball);
        let t = ball.binary_search(&target).unwrap_or(0);
        for &d in zero_dims {
            xl.set(t, d, 0.0);
        }
        let out = self.forward(&local, &xl)?;
        Ok(out.prediction(t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub loss_history: Vec<f64>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(params: &[&Tensor]) -> Self {
        Adam {
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            t: 0,
        }
    }

    fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor], cfg: &GatConfig) {
        self.t += 1;
        let (b1, b2) = cfg.adam_betas;
        let c1 = 1.0 - libm::pow(b1, self.t as f64);
        let c2 = 1.0 - libm::pow(b2, self.t as f64);
        for (k, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, (w, gi)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                m[i] = b1 * m[i] + (1.0 - b1) * gi;
                v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                *w -= cfg.lr * mh / (math::sqrt(vh) + cfg.adam_eps);
            }
        }
    }
}

/// Full-batch training on the rows in `train_rows`, whose labels must be
/// present. Returns a frozen model and the per-epoch loss (measured before
/// each update).
pub fn train(
    graph: &GatGraph,
    x: &Tensor,
    labels: &[Option<Label>],
    train_rows: &[usize],
    config: &GatConfig,
) -> Result<(GatModel, TrainReport), GatError> {
    config.validate()?;
    let rows: Vec<usize> = train_rows.iter().copied().filter(|&r| labels[r].is_some()).collect();
    if rows.len() < 2 {
        return Err(GatError::TooFewLabels(rows.len()));
    }
    let classes = rows.iter().filter(|&&r| labels[r] == Some(Label::Misinformation)).count();
    if classes == 0 || classes == rows.len() {
        return Err(GatError::SingleClassTrainingSet);
    }
    let mut onehot = Tensor::zeros(rows.len(), 2);
    for (k, &r) in rows.iter().enumerate() {
        if let Some(l) = labels[r] {
            onehot.set(k, l.index(), 1.0);
        }
    }
    let scale = -1.0 / rows.len() as f64;

    let mut model = GatModel::init(x.cols(), config)?;
    let mut adam = Adam::new(&model.params());
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss_value, grads) = {
            let mut tape = Tape::new();
            let xv = tape.constant_ref(x);
            let (fwd, pvars) = model.forward_on_tape(&mut tape, graph, xv, true)?;
            let logp = tape.log_row_softmax(fwd.logits);
            let picked = tape.gather_rows(logp, &rows)?;
            let target = tape.constant_ref(&onehot);
            let ce = tape.mul(picked, target)?;
            let total = tape.reduce_sum(ce);
            let loss = tape.scalar_mul(total, scale);
            let loss_value = tape.value(loss).item();
            if !loss_value.is_finite() {
                return Err(GatError::NonFiniteLoss { epoch });
            }
            let mut g = tape.backward(loss)?;
            let grads: Vec<Tensor> = pvars
                .iter()
                .zip(model.params())
                .map(|(&v, p)| g.take(v).unwrap_or_else(|| Tensor::zeros(p.rows(), p.cols())))
                .collect();
            (loss_value, grads)
        };
        history.push(loss_value);
        adam.step(model.params_mut(), &grads, config);
    }
    model.freeze();
    Ok((model, TrainReport { loss_history: history }))
}

/// Stratified train/validation/test partition of the labeled rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    /// 70/10/20 per class after a seeded shuffle; each part sorted.
    pub fn stratified(labels: &[Option<Label>], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut split = Split {
            train: Vec::new(),
            val: Vec::new(),
            test: Vec::new(),
        };
        for class in [Label::Misinformation, Label::Fact] {
            let mut rows: Vec<usize> = (0..labels.len()).filter(|&r| labels[r] == Some(class)).collect();
            rows.shuffle(&mut rng);
            let n = rows.len() as f64;
            let n_train = math::round(0.7 * n) as usize;
            let n_val = (math::round(0.1 * n) as usize).min(rows.len() - n_train);
            split.train.extend_from_slice(&rows[..n_train]);
            split.val.extend_from_slice(&rows[n_train..n_train + n_val]);
            split.test.extend_from_slice(&rows[n_train + n_val..]);
        }
        split.train.sort_unstable();
        split.val.sort_unstable();
        split.test.sort_unstable();
        split
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_x(n: usize, d: usize) -> Tensor {
        Tensor::from_vec(n, d, (0..n * d).map(|i| libm::sin(i as f64 * 0.7)).collect())
    }

    #[test]
    fn isolated_node_attends_to_itself() {
        let g = GatGraph::from_lists(&[vec![]], true);
        let cfg = GatConfig::default();
        let m = GatModel::init(3, &cfg).unwrap();
        let x = tiny_x(1, 3);
        let out = m.forward(&g, &x).unwrap();
        assert_eq!(out.attention1[0], vec![1.0]);
        assert_eq!(out.attention2, vec![1.0]);
        let a = attention_coefficients(&m.layer1[0], &x, 0, g.neighbors(0), 0.2).unwrap();
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn identical_neighbors_get_equal_attention() {
        let mut x = tiny_x(3, 4);
        let r1 = x.row(1).to_vec();
        x.row_mut(2).copy_from_slice(&r1);
        let g = GatGraph::from_lists(&[vec![1, 2], vec![0], vec![0]], true);
        let m = GatModel::init(4, &GatConfig::default()).unwrap();
        let out = m.forward(&g, &x).unwrap();
        let a = &out.attention1[0][g.edge_range(0)];
        // neighbors of 0: [0, 1, 2]
        assert!((a[1] - a[2]).abs() < 1e-15);
    }

    #[test]
    fn zero_features_zero_head_gives_half() {
        let g = GatGraph::from_lists(&[vec![1], vec![0], vec![]], true);
        let mut m = GatModel::init(5, &GatConfig::default()).unwrap();
        m.layer2 = AttentionHead::zeros(16, 2);
        let out = m.forward(&g, &Tensor::zeros(3, 5)).unwrap();
        for r in 0..3 {
            assert_eq!(out.prediction(r).probs, [0.5, 0.5]);
            assert_eq!(out.prediction(r).label, Label::Misinformation);
        }
    }

    #[test]
    fn lr_zero_keeps_parameters() {
        let g = GatGraph::from_lists(&[vec![1], vec![0], vec![3], vec![2]], true);
        let x = tiny_x(4, 3);
        let labels = [Some(Label::Fact), Some(Label::Misinformation), Some(Label::Fact), Some(Label::Misinformation)];
        let cfg = GatConfig {
            lr: 0.0,
            epochs: 5,
            seed: 9,
            ..GatConfig::default()
        };
        let (m, rep) = train(&g, &x, &labels, &[0, 1, 2, 3], &cfg).unwrap();
        let init = GatModel::init(3, &cfg).unwrap();
        assert_eq!(m.layer1, init.layer1);
        assert_eq!(m.layer2, init.layer2);
        assert_eq!(rep.loss_history.len(), 5);
        assert!(m.frozen);
    }

    #[test]
    fn training_errors() {
        let g = GatGraph::from_lists(&[vec![], vec![]], true);
        let x = tiny_x(2, 2);
        let same = [Some(Label::Fact), Some(Label::Fact)];
        assert_eq!(
            train(&g, &x, &same, &[0, 1], &GatConfig::default()).unwrap_err(),
            GatError::SingleClassTrainingSet
        );
        assert_eq!(
            train(&g, &x, &[Some(Label::Fact), None], &[0, 1], &GatConfig::default()).unwrap_err(),
            GatError::TooFewLabels(1)
        );
        let bad = GatConfig {
            epochs: 0,
            ..GatConfig::default()
        };
        assert!(matches!(GatModel::init(2, &bad), Err(GatError::InvalidConfig(_))));
    }

    #[test]
    fn masked_prediction_errors_and_identity() {
        let g = GatGraph::from_lists(&[vec![1], vec![0, 2], vec![1], vec![]], true);
        let x = tiny_x(4, 3);
        let mut m = GatModel::init(3, &GatConfig::default()).unwrap();
        assert_eq!(m.predict_with_mask(&g, &x, &[], 0).unwrap_err(), GatError::NotFrozen);
        m.freeze();
        let full = m.predict(&g, &x).unwrap();
        for t in 0..4 {
            let p = m.predict_with_mask(&g, &x, &[], t).unwrap();
            assert_eq!(p, full[t]);
        }
        assert_eq!(
            m.predict_with_mask(&g, &x, &[3], 0).unwrap_err(),
            GatError::DimOutOfRange { dim: 3, total: 3 }
        );
    }

    #[test]
    fn stratified_split_sizes() {
        let labels: Vec<Option<Label>> = (0..100)
            .map(|i| match i % 4 {
                0 => None,
                1 => Some(Label::Fact),
                _ => Some(Label::Misinformation),
            })
            .collect();
        let s = Split::stratified(&labels, 3);
        assert_eq!(s.train.len() + s.val.len() + s.test.len(), 75);
        assert_eq!(s.train.len(), 35 + 18);
        assert_eq!(s, Split::stratified(&labels, 3));
        assert!(s.train.iter().all(|&r| labels[r].is_some()));
    }
}
