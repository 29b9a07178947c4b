//! Token encoder and integrated-gradients attributions for the text path.
//!
//! Attributions explain `f = P(predicted class | target)` of a frozen
//! classifier as a function of the target's text input, with every other
//! node held fixed. In token mode the input is the matrix of token
//! embeddings (one row per token, mean-pooled by the encoder); in embedding
//! mode it is the precomputed sentence embedding itself. The baseline is
//! the all-zero input.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::features::{EmbeddingTable, FeatureError, FeatureLayout, Normalizer, TextProjection};
use crate::gat::{GatError, GatGraph, GatModel};
use crate::graph::{Label, SocialGraph};
use crate::tensor::{Tape, Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TextError {
    #[error("node `{0}` has no text tokens to attribute")]
    EmptyText(String),
    #[error("{0}")]
    ModeUnavailable(&'static str),
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("integrated gradients needs at least one step")]
    ZeroSteps,
    #[error(transparent)]
    Gat(#[from] GatError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Lowercases and splits on whitespace and punctuation. `#hashtags` and
/// `@mentions` stay whole; a bare `#` or `@` is dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        if !cur.is_empty() && cur != "#" && cur != "@" {
            out.push(core::mem::take(cur));
        }
        cur.clear();
    };
    for ch in text.chars() {
        if ch.is_alphanumeric() || ch == '_' {
            cur.extend(ch.to_lowercase());
        } else if ch == '#' || ch == '@' {
            flush(&mut cur, &mut out);
            cur.push(ch);
        } else {
            flush(&mut cur, &mut out);
        }
    }
    flush(&mut cur, &mut out);
    out
}

/// Fixed random token table with mean pooling, standing in for a language
/// model. Row 0 is the out-of-vocabulary row and is all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyTextEncoder {
    vocab: BTreeMap<String, usize>,
    table: Tensor,
}

pub const UNK: usize = 0;

impl ToyTextEncoder {
    /// Vocabulary of every token in `texts`; rows are standard normal,
    /// drawn in lexicographic token order.
    pub fn fit<'t>(texts: impl IntoIterator<Item = &'t str>, d_tok: usize, seed: u64) -> Self {
        let mut tokens: Vec<String> = texts.into_iter().flat_map(tokenize).collect();
        tokens.sort_unstable();
        tokens.dedup();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut table = Tensor::zeros(tokens.len() + 1, d_tok);
        for v in &mut table.as_mut_slice()[d_tok..] {
            *v = StandardNormal.sample(&mut rng);
        }
        let vocab = tokens.into_iter().enumerate().map(|(i, t)| (t, i + 1)).collect();
        ToyTextEncoder { vocab, table }
    }

    /// Encoder with explicit rows: `table` row 0 is the UNK row, row `i + 1`
    /// belongs to `tokens[i]`.
    pub fn from_parts(tokens: &[&str], table: Tensor) -> Result<Self, TextError> {
        if table.rows() != tokens.len() + 1 {
            return Err(TextError::ShapeMismatch {
                expected: (tokens.len() + 1, table.cols()),
                got: table.shape(),
            });
        }
        let vocab = tokens.iter().enumerate().map(|(i, t)| (String::from(*t), i + 1)).collect();
        Ok(ToyTextEncoder { vocab, table })
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn token_id(&self, token: &str) -> usize {
        self.vocab.get(token).copied().unwrap_or(UNK)
    }

    pub fn token_ids(&self, text: &str) -> (Vec<String>, Vec<usize>) {
        let tokens = tokenize(text);
        let ids = tokens.iter().map(|t| self.token_id(t)).collect();
        (tokens, ids)
    }

    /// `len(ids) × dim` matrix of token rows.
    pub fn token_matrix(&self, ids: &[usize]) -> Tensor {
        self.table.select_rows(ids)
    }

    /// Mean of the token rows; the zero vector for token-free text.
    pub fn encode(&self, text: &str) -> Vec<f64> {
        let (_, ids) = self.token_ids(text);
        let mut out = vec![0.0; self.dim()];
        if ids.is_empty() {
            return out;
        }
        for &i in &ids {
            for (o, v) in out.iter_mut().zip(self.table.row(i)) {
                *o += v;
            }
        }
        let n = ids.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    /// Encodes every classifiable node of `g`.
    pub fn embedding_table(&self, g: &SocialGraph) -> Result<EmbeddingTable, FeatureError> {
        let mut t = EmbeddingTable::new(self.dim());
        for &r in &g.classifiable() {
            let node = g.node(r);
            let v = self.encode(&node.text).into_iter().map(|x| x as f32).collect();
            t.insert(node.id.clone(), Some(node.lang), v)?;
        }
        Ok(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IgResult {
    /// Attribution per input entry, same shape as the input.
    pub raw: Tensor,
    pub f_input: f64,
    pub f_baseline: f64,
    /// `|Σ raw − (f(x) − f(baseline))|`.
    pub convergence_delta: f64,
}

/// Integrated gradients by the midpoint rule:
/// `IG_i = (x_i − x'_i) · (1/m) Σ_{s=1..m} ∂f(x' + (s − ½)/m · (x − x'))/∂x_i`.
///
/// `f` returns its value and gradient at a point.
pub fn integrated_gradients<F>(mut f: F, x: &Tensor, baseline: &Tensor, steps: usize) -> Result<IgResult, TextError>
where
    F: FnMut(&Tensor) -> Result<(f64, Tensor), TextError>,
{
    if x.shape() != baseline.shape() {
        return Err(TextError::ShapeMismatch {
            expected: x.shape(),
            got: baseline.shape(),
        });
    }
    if steps == 0 {
        return Err(TextError::ZeroSteps);
    }
    let diff: Vec<f64> = x.as_slice().iter().zip(baseline.as_slice()).map(|(a, b)| a - b).collect();
    let mut acc = vec![0.0; x.len()];
    let mut point = baseline.clone();
    for s in 1..=steps {
        let t = (s as f64 - 0.5) / steps as f64;
        for ((p, b), d) in point.as_mut_slice().iter_mut().zip(baseline.as_slice()).zip(&diff) {
            *p = b + t * d;
        }
        let (_, g) = f(&point)?;
        if g.shape() != x.shape() {
            return Err(TextError::ShapeMismatch {
                expected: x.shape(),
                got: g.shape(),
            });
        }
        for (a, gi) in acc.iter_mut().zip(g.as_slice()) {
            *a += gi;
        }
    }
    let raw: Vec<f64> = acc.iter().zip(&diff).map(|(a, d)| d * (a / steps as f64)).collect();
    let (f_input, _) = f(x)?;
    let (f_baseline, _) = f(baseline)?;
    let total: f64 = raw.iter().sum();
    Ok(IgResult {
        raw: Tensor::from_vec(x.rows(), x.cols(), raw),
        f_input,
        f_baseline,
        convergence_delta: (total - (f_input - f_baseline)).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributionMode {
    /// One score per token of the node's text.
    Tokens,
    /// One score per dimension of the precomputed embedding.
    EmbeddingDims,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenAttribution {
    pub target: String,
    pub mode: AttributionMode,
    pub predicted: Label,
    pub tokens: Vec<String>,
    /// `raw / max|raw|`, or all zeros when every raw value is zero.
    pub scores: Vec<f64>,
    pub raw: Vec<f64>,
    pub convergence_delta: f64,
    pub steps: usize,
}

fn normalized_scores(raw: &[f64]) -> Vec<f64> {
    let m = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if m > 0.0 {
        raw.iter().map(|v| (v / m).clamp(-1.0, 1.0)).collect()
    } else {
        vec![0.0; raw.len()]
    }
}

/// The frozen classifier together with the text block's construction,
/// i.e. everything that maps a text input to the target's probability.
pub struct TextPath<'a> {
    pub model: &'a GatModel,
    pub graph: &'a GatGraph,
    /// Normalized features of all rows.
    pub x: &'a Tensor,
    pub layout: &'a FeatureLayout,
    pub projection: &'a TextProjection,
    pub normalizer: &'a Normalizer,
}

/// Precomputed pieces for one target: its receptive field with the target
/// moved to row 0, and the constant parts of its feature row.
struct LocalPath<'a> {
    model: &'a GatModel,
    graph: GatGraph,
    others: Option<Tensor>,
    left: Option<Tensor>,
    right: Option<Tensor>,
    proj_t: Tensor,
    bias: Tensor,
    neg_mean: Tensor,
    scale: Tensor,
}

impl<'a> LocalPath<'a> {
    fn new(p: &TextPath<'a>, target: usize) -> Result<Self, TextError> {
        let text = p.layout.text.clone();
        if text.is_empty() {
            return Err(TextError::ModeUnavailable("the feature layout has no text block"));
        }
        let mut order = vec![target];
        order.extend(p.graph.ball(target, 2).into_iter().filter(|&r| r != target));
        let graph = p.graph.induced(&order);
        let others = (order.len() > 1).then(|| p.x.select_rows(&order[1..]));
        let row = p.x.row(target);
        let slice = |r: core::ops::Range<usize>| (!r.is_empty()).then(|| Tensor::row_vector(&row[r]));
        let col_row = |v: &[f64], f: fn(f64) -> f64| Tensor::row_vector(&v[text.clone()].iter().map(|&a| f(a)).collect::<Vec<_>>());
        Ok(LocalPath {
            model: p.model,
            graph,
            others,
            left: slice(0..text.start),
            right: slice(text.end..p.x.cols()),
            proj_t: p.projection.transposed(),
            bias: Tensor::row_vector(&p.projection.bias),
            neg_mean: col_row(&p.normalizer.mean, |a| -a),
            scale: col_row(&p.normalizer.scale, |a| a),
        })
    }

    /// Class probabilities of the target and, if `class` is given, the
    /// gradient of that class's probability with respect to `e`.
    fn run(&self, e: &Tensor, pool: f64, class: Option<usize>) -> Result<([f64; 2], Option<Tensor>), TextError> {
        if e.cols() != self.proj_t.rows() {
            return Err(TextError::ShapeMismatch {
                expected: (e.rows(), self.proj_t.rows()),
                got: e.shape(),
            });
        }
        let mut tape = Tape::new();
        let ev = tape.leaf(e.clone());
        let weights = tape.constant(Tensor::from_vec(1, e.rows(), vec![pool; e.rows()]));
        let pooled = tape.matmul(weights, ev)?;
        let p = tape.constant_ref(&self.proj_t);
        let raw = tape.matmul(pooled, p)?;
        let b = tape.constant_ref(&self.bias);
        let raw = tape.add(raw, b)?;
        let m = tape.constant_ref(&self.neg_mean);
        let centered = tape.add(raw, m)?;
        let s = tape.constant_ref(&self.scale);
        let text = tape.mul(centered, s)?;
        let mut parts = Vec::new();
        if let Some(l) = &self.left {
            parts.push(tape.constant_ref(l));
        }
        parts.push(text);
        if let Some(r) = &self.right {
            parts.push(tape.constant_ref(r));
        }
        let row = tape.concat_cols(&parts)?;
        let xall = match &self.others {
            Some(o) => {
                let ov = tape.constant_ref(o);
                tape.concat_rows(&[row, ov])?
            }
            None => row,
        };
        let (fwd, _) = self.model.forward_on_tape(&mut tape, &self.graph, xall, false)?;
        let probs = tape.row_softmax(fwd.logits);
        let target = tape.gather_rows(probs, &[0])?;
        let pv = tape.value(target);
        let out = [pv.get(0, 0), pv.get(0, 1)];
        let Some(c) = class else {
            return Ok((out, None));
        };
        let mut onehot = Tensor::zeros(1, 2);
        onehot.set(0, c, 1.0);
        let oh = tape.constant(onehot);
        let picked = tape.mul(target, oh)?;
        let f = tape.reduce_sum(picked);
        let g = tape.grad_wrt_input(f, ev)?;
        Ok((out, Some(g)))
    }

    fn attribute(&self, e: &Tensor, pool: f64, steps: usize) -> Result<(Label, IgResult), TextError> {
        let (probs, _) = self.run(e, pool, None)?;
        let predicted = crate::gat::Prediction::from_probs(probs).label;
        let class = predicted.index();
        let baseline = Tensor::zeros(e.rows(), e.cols());
        let ig = integrated_gradients(
            |pt| {
                let (pr, g) = self.run(pt, pool, Some(class))?;
                Ok((pr[class], g.unwrap_or_else(|| Tensor::zeros(pt.rows(), pt.cols()))))
            },
            e,
            &baseline,
            steps,
        )?;
        Ok((predicted, ig))
    }
}

impl<'a> TextPath<'a> {
    /// Token-level attribution of row `target`, whose node text is `text`.
    pub fn explain_tokens(
        &self,
        target: usize,
        id: &str,
        encoder: &ToyTextEncoder,
        text: &str,
        steps: usize,
    ) -> Result<TokenAttribution, TextError> {
        let (tokens, ids) = encoder.token_ids(text);
        if ids.is_empty() {
            return Err(TextError::EmptyText(id.into()));
        }
        let local = LocalPath::new(self, target)?;
        let e = encoder.token_matrix(&ids);
        let (predicted, ig) = local.attribute(&e, 1.0 / ids.len() as f64, steps)?;
        let raw: Vec<f64> = (0..ig.raw.rows()).map(|r| ig.raw.row(r).iter().sum()).collect();
        Ok(TokenAttribution {
            target: id.into(),
            mode: AttributionMode::Tokens,
            predicted,
            tokens,
            scores: normalized_scores(&raw),
            raw,
            convergence_delta: ig.convergence_delta,
            steps,
        })
    }

    /// Attribution of row `target` over the dimensions of its precomputed
    /// text embedding.
    pub fn explain_embedding(
        &self,
        target: usize,
        id: &str,
        embedding: &[f64],
        steps: usize,
    ) -> Result<TokenAttribution, TextError> {
        let local = LocalPath::new(self, target)?;
        let e = Tensor::row_vector(embedding);
        let (predicted, ig) = local.attribute(&e, 1.0, steps)?;
        let raw = ig.raw.into_vec();
        Ok(TokenAttribution {
            target: id.into(),
            mode: AttributionMode::EmbeddingDims,
            predicted,
            tokens: (0..raw.len()).map(|k| alloc::format!("e{k}")).collect(),
            scores: normalized_scores(&raw),
            raw,
            convergence_delta: ig.convergence_delta,
            steps,
        })
    }

    /// Target probabilities recomputed through the text path, for checking
    /// that the reconstruction matches the stored features.
    pub fn probabilities(&self, target: usize, embedding: &Tensor, pool: f64) -> Result<[f64; 2], TextError> {
        Ok(LocalPath::new(self, target)?.run(embedding, pool, None)?.0)
    }
}
