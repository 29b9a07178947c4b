//! Per-node multimodal feature vectors.
//!
//! A row is `metadata ⊕ structural ⊕ projected text` (blocks absent for
//! single-modality runs), followed by an optional block of injected noise
//! columns used by the robustness protocol. Every column is z-normalized
//! over the classifiable nodes; the [`FeatureLayout`] remembers which
//! modality each column came from.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{GraphError, Lang, MetadataCounts, RelationKind, SocialGraph};
use crate::math;
use crate::tensor::Tensor;

pub const METADATA_DIM: usize = 3;
pub const STRUCTURAL_DIM: usize = 7;
pub const DEFAULT_EMBEDDING_DIM: usize = 768;
pub const DEFAULT_PROJECTION_DIM: usize = 812;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("missing text embeddings for {} node(s): {}", .0.len(), preview(.0))]
    MissingEmbedding(Vec<String>),
    #[error("embeddings reference {} id(s) absent from the graph: {}", .0.len(), preview(.0))]
    UnknownEmbeddingId(Vec<String>),
    #[error("non-finite value in embedding for `{0}`")]
    NonFiniteEmbedding(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn preview(ids: &[String]) -> String {
    let mut out = String::new();
    for (i, id) in ids.iter().take(5).enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(id);
    }
    if ids.len() > 5 {
        out.push_str(", ...");
    }
    out
}

/// Which input blocks a classifier sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    /// Metadata and structural features.
    Graph,
    /// Projected text embedding only.
    Text,
    /// Everything.
    Multimodal,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Graph, Modality::Text, Modality::Multimodal];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Graph => "graph",
            Modality::Text => "text",
            Modality::Multimodal => "multimodal",
        }
    }

    pub fn parse(s: &str) -> Option<Modality> {
        Modality::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn uses_graph(self) -> bool {
        self != Modality::Text
    }

    pub fn uses_text(self) -> bool {
        self != Modality::Graph
    }
}

/// Origin block of a single feature column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityTag {
    Metadata,
    #[serde(rename = "graph")]
    Structural,
    Text,
    Noise,
}

impl ModalityTag {
    pub const ALL: [ModalityTag; 4] = [
        ModalityTag::Metadata,
        ModalityTag::Structural,
        ModalityTag::Text,
        ModalityTag::Noise,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModalityTag::Metadata => "metadata",
            ModalityTag::Structural => "graph",
            ModalityTag::Text => "text",
            ModalityTag::Noise => "noise",
        }
    }
}

/// Column ranges of each block; contiguous, ordered
/// `[metadata | structural | text | noise]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub meta: Range<usize>,
    pub structural: Range<usize>,
    pub text: Range<usize>,
    pub noise: Range<usize>,
    pub total_dim: usize,
}

impl FeatureLayout {
    pub fn new(modality: Modality, d_proj: usize, n_noise: usize) -> Self {
        let meta_len = if modality.uses_graph() { METADATA_DIM } else { 0 };
        let struct_len = if modality.uses_graph() { STRUCTURAL_DIM } else { 0 };
        let text_len = if modality.uses_text() { d_proj } else { 0 };
        let meta = 0..meta_len;
        let structural = meta.end..meta.end + struct_len;
        let text = structural.end..structural.end + text_len;
        let noise = text.end..text.end + n_noise;
        let total_dim = noise.end;
        FeatureLayout {
            meta,
            structural,
            text,
            noise,
            total_dim,
        }
    }

    pub fn tag(&self, dim: usize) -> Option<ModalityTag> {
        if self.meta.contains(&dim) {
            Some(ModalityTag::Metadata)
        } else if self.structural.contains(&dim) {
            Some(ModalityTag::Structural)
        } else if self.text.contains(&dim) {
            Some(ModalityTag::Text)
        } else if self.noise.contains(&dim) {
            Some(ModalityTag::Noise)
        } else {
            None
        }
    }

    /// Human-readable name of column `dim`, e.g. `log1p_retweets`,
    /// `deg_mentions`, `text_17`.
    pub fn column_name(&self, dim: usize) -> Option<String> {
        const META: [&str; METADATA_DIM] = ["log1p_retweets", "log1p_replies", "log1p_quotes"];
        Some(match self.tag(dim)? {
            ModalityTag::Metadata => META[dim - self.meta.start].into(),
            ModalityTag::Structural => match RelationKind::ALL.get(dim - self.structural.start) {
                Some(k) => alloc::format!("deg_{k}"),
                None => "deg_total".into(),
            },
            ModalityTag::Text => alloc::format!("text_{}", dim - self.text.start),
            ModalityTag::Noise => alloc::format!("noise_{}", dim - self.noise.start),
        })
    }

    fn with_noise(&self, n_noise: usize) -> Self {
        let noise = self.text.end..self.text.end + n_noise;
        FeatureLayout {
            total_dim: noise.end,
            noise,
            ..self.clone()
        }
    }
}

/// `[log1p(retweets), log1p(replies), log1p(quotes)]`.
pub fn aggregate_metadata(m: &MetadataCounts) -> [f64; METADATA_DIM] {
    [
        math::ln_1p(m.n_retweets as f64),
        math::ln_1p(m.n_replies as f64),
        math::ln_1p(m.n_quotes as f64),
    ]
}

/// `log1p` of the per-relation-kind degrees followed by `log1p` of the
/// total degree.
pub fn structural_features(g: &SocialGraph, id: &str) -> Result<[f64; STRUCTURAL_DIM], GraphError> {
    let idx = g.index_of(id)?;
    Ok(structural_row(g, idx))
}

fn structural_row(g: &SocialGraph, idx: usize) -> [f64; STRUCTURAL_DIM] {
    let deg = g.relation_degrees(idx);
    let mut out = [0.0; STRUCTURAL_DIM];
    for (o, d) in out.iter_mut().zip(deg) {
        *o = math::ln_1p(d as f64);
    }
    out[6] = math::ln_1p(deg.iter().sum::<usize>() as f64);
    out
}

/// Affine map from the text-embedding space into the text block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextProjection {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl TextProjection {
    /// Gaussian weights with variance `1/in_dim`, zero bias.
    pub fn seeded(in_dim: usize, out_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / math::sqrt(in_dim.max(1) as f64);
        let weights = (0..in_dim * out_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        TextProjection {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut weights = vec![0.0; dim * dim];
        for i in 0..dim {
            weights[i * dim + i] = 1.0;
        }
        TextProjection {
            in_dim: dim,
            out_dim: dim,
            weights,
            bias: vec![0.0; dim],
        }
    }

    pub fn apply(&self, e: &[f64]) -> Result<Vec<f64>, FeatureError> {
        if e.len() != self.in_dim {
            return Err(FeatureError::DimensionMismatch {
                expected: self.in_dim,
                got: e.len(),
            });
        }
        Ok(self
            .weights
            .chunks_exact(self.in_dim.max(1))
            .take(self.out_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(e).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect())
    }

    /// `in_dim × out_dim` tensor, i.e. the weights laid out for `e · Wᵀ`.
    pub fn transposed(&self) -> Tensor {
        let mut t = Tensor::zeros(self.in_dim, self.out_dim);
        for o in 0..self.out_dim {
            for i in 0..self.in_dim {
                t.set(i, o, self.weights[o * self.in_dim + i]);
            }
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub lang: Option<Lang>,
    pub vector: Vec<f32>,
}

/// Precomputed text embeddings keyed by node id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub entries: BTreeMap<String, EmbeddingEntry>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, id: impl Into<String>, lang: Option<Lang>, vector: Vec<f32>) -> Result<(), FeatureError> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(FeatureError::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFiniteEmbedding(id));
        }
        self.entries.insert(id, EmbeddingEntry { lang, vector });
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.entries.get(id).map(|e| e.vector.as_slice())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Checks that every embedding belongs to a node of `g`.
    pub fn bind(&self, g: &SocialGraph) -> Result<(), FeatureError> {
        let unknown: Vec<String> = self
            .entries
            .keys()
            .filter(|id| g.get(id).is_none())
            .cloned()
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(FeatureError::UnknownEmbeddingId(unknown))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub modality: Modality,
    pub d_proj: usize,
    pub proj_seed: u64,
}

impl Default for FeatureSpec {
    fn default() -> Self {
        FeatureSpec {
            modality: Modality::Multimodal,
            d_proj: DEFAULT_PROJECTION_DIM,
            proj_seed: 0x6d75_3278,
        }
    }
}

/// Per-column affine normalization: `(x - mean) * scale`, with `scale = 0`
/// for constant columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalizer {
    pub fn apply(&self, col: usize, v: f64) -> f64 {
        (v - self.mean[col]) * self.scale[col]
    }
}

/// Feature rows before normalization.
#[derive(Debug, Clone)]
pub struct RawFeatures {
    pub ids: Vec<String>,
    /// Graph node index of each row.
    pub graph_rows: Vec<usize>,
    pub cols: usize,
    /// Row-major `ids.len() × cols`.
    pub data: Vec<f64>,
    pub layout: FeatureLayout,
}

impl RawFeatures {
    /// Assembles unnormalized rows for every classifiable node.
    ///
    /// Returns the projection used for the text block, if any.
    pub fn build(
        g: &SocialGraph,
        embeddings: Option<&EmbeddingTable>,
        spec: &FeatureSpec,
    ) -> Result<(Self, Option<TextProjection>), FeatureError> {
        let rows = g.classifiable();
        let layout = FeatureLayout::new(spec.modality, spec.d_proj, 0);
        let projection = if spec.modality.uses_text() {
            let emb = embeddings.ok_or_else(|| {
                FeatureError::MissingEmbedding(rows.iter().map(|&r| g.node(r).id.clone()).collect())
            })?;
            emb.bind(g)?;
            let missing: Vec<String> = rows
                .iter()
                .map(|&r| &g.node(r).id)
                .filter(|id| emb.get(id).is_none())
                .cloned()
                .collect();
            if !missing.is_empty() {
                return Err(FeatureError::MissingEmbedding(missing));
            }
            Some(TextProjection::seeded(emb.dim, spec.d_proj, spec.proj_seed))
        } else {
            None
        };

        let cols = layout.total_dim;
        let mut data = Vec::with_capacity(rows.len() * cols);
        let mut e64 = Vec::new();
        for &r in &rows {
            let node = g.node(r);
            if spec.modality.uses_graph() {
                data.extend_from_slice(&aggregate_metadata(&node.metadata));
                data.extend_from_slice(&structural_row(g, r));
            }
            if let (Some(proj), Some(emb)) = (&projection, embeddings) {
                // presence checked above
                let v = emb.get(&node.id).unwrap_or(&[]);
                e64.clear();
                e64.extend(v.iter().map(|&x| x as f64));
                data.extend(proj.apply(&e64)?);
            }
        }

        Ok((
            RawFeatures {
                ids: rows.iter().map(|&r| g.node(r).id.clone()).collect(),
                graph_rows: rows,
                cols,
                data,
                layout,
            },
            projection,
        ))
    }

    pub fn rows(&self) -> usize {
        self.ids.len()
    }

    /// Appends `n` noise columns drawn i.i.d. standard normal from `seed`,
    /// or filled with the constant `1.0` when `constant` is set.
    pub fn append_noise(&mut self, n: usize, seed: u64, constant: bool) {
        if n == 0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let old = self.cols;
        let new_cols = old + n;
        let mut data = Vec::with_capacity(self.rows() * new_cols);
        for i in 0..self.rows() {
            data.extend_from_slice(&self.data[i * old..(i + 1) * old]);
            for _ in 0..n {
                let v = if constant { 1.0 } else { StandardNormal.sample(&mut rng) };
                data.push(v);
            }
        }
        self.data = data;
        self.cols = new_cols;
        self.layout = self.layout.with_noise(self.layout.noise.len() + n);
    }

    /// Column z-normalization over all rows (population variance).
    pub fn normalize(self) -> (FeatureMatrix, Normalizer) {
        let n = self.rows();
        let cols = self.cols;
        let mut mean = vec![0.0; cols];
        let mut var = vec![0.0; cols];
        for row in self.data.chunks_exact(cols.max(1)).take(n) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n.max(1) as f64;
        }
        for row in self.data.chunks_exact(cols.max(1)).take(n) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|s| {
                let std = math::sqrt(s / n.max(1) as f64);
                if std < 1e-12 {
                    0.0
                } else {
                    1.0 / std
                }
            })
            .collect();
        let normalizer = Normalizer { mean, scale };
        let mut data = Vec::with_capacity(self.data.len());
        for row in self.data.chunks_exact(cols.max(1)).take(n) {
            for (j, &v) in row.iter().enumerate() {
                data.push(normalizer.apply(j, v) as f32);
            }
        }
        let row_of = self.ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        (
            FeatureMatrix {
                ids: self.ids,
                row_of,
                graph_rows: self.graph_rows,
                rows: n,
                cols,
                data,
                layout: self.layout,
            },
            normalizer,
        )
    }
}

/// Normalized feature rows of every classifiable node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub ids: Vec<String>,
    pub row_of: BTreeMap<String, usize>,
    pub graph_rows: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
    pub layout: FeatureLayout,
}

impl FeatureMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_index(&self, id: &str) -> Option<usize> {
        self.row_of.get(id).copied()
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(self.rows, self.cols, self.data.iter().map(|&v| v as f64).collect())
    }
}

/// Builds the normalized feature matrix for `spec.modality`.
pub fn build_features(
    g: &SocialGraph,
    embeddings: Option<&EmbeddingTable>,
    spec: &FeatureSpec,
) -> Result<FeatureMatrix, FeatureError> {
    let (raw, _) = RawFeatures::build(g, embeddings, spec)?;
    Ok(raw.normalize().0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{NodeKind, PostNode, Relation};
    use alloc::format;

    #[test]
    fn column_names_follow_layout() {
        let l = FeatureLayout::new(Modality::Multimodal, 2, 1).with_noise(1);
        let names: Vec<String> = (0..l.total_dim).map(|d| l.column_name(d).unwrap()).collect();
        assert_eq!(names[0], "log1p_retweets");
        assert_eq!(names[4], "deg_mentions");
        assert_eq!(names[9], "deg_total");
        assert_eq!(&names[10..], ["text_0", "text_1", "noise_0"]);
        assert_eq!(l.column_name(l.total_dim), None);
    }

    fn post(id: &str, kind: NodeKind, counts: (u64, u64, u64)) -> PostNode {
        PostNode {
            id: id.into(),
            kind,
            lang: Lang::En,
            text: String::new(),
            metadata: MetadataCounts {
                n_retweets: counts.0,
                n_replies: counts.1,
                n_quotes: counts.2,
            },
            label: None,
        }
    }

    #[test]
    fn metadata_log1p() {
        assert_eq!(aggregate_metadata(&MetadataCounts::default()), [0.0; 3]);
        let m = MetadataCounts {
            n_retweets: 26,
            n_replies: 42,
            n_quotes: 7,
        };
        let v = aggregate_metadata(&m);
        // log(27), log(43), log(8) via an independent route
        let expect = [libm::log(27.0), libm::log(43.0), 3.0 * core::f64::consts::LN_2];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let bigger = aggregate_metadata(&MetadataCounts { n_replies: 43, ..m });
        assert!(bigger[1] > v[1] && bigger[0] == v[0]);
    }

    #[test]
    fn structural_isolated_and_single_edge() {
        let g = SocialGraph::new(
            vec![post("a", NodeKind::Tweet, (0, 0, 0)), post("r", NodeKind::Reply, (0, 0, 0)), post("z", NodeKind::Tweet, (0, 0, 0))],
            vec![Relation::new("r", "a", RelationKind::ReplyTo)],
        )
        .unwrap();
        assert_eq!(structural_features(&g, "z").unwrap(), [0.0; 7]);
        let r = structural_features(&g, "r").unwrap();
        let nonzero = r[..6].iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 1);
        assert!(r[RelationKind::ReplyTo.index()] > 0.0);
        assert!(structural_features(&g, "nope").is_err());
    }

    #[test]
    fn projection_identity_and_bias() {
        let e: Vec<f64> = (0..768).map(|i| i as f64 * 0.01).collect();
        assert_eq!(TextProjection::identity(768).apply(&e).unwrap(), e);
        let mut p = TextProjection::seeded(768, 16, 3);
        p.bias = (0..16).map(|i| i as f64).collect();
        assert_eq!(p.apply(&vec![0.0; 768]).unwrap(), p.bias);
        assert_eq!(
            p.apply(&[1.0]).unwrap_err(),
            FeatureError::DimensionMismatch { expected: 768, got: 1 }
        );
    }

    #[test]
    fn projection_matches_naive_multiply() {
        let p = TextProjection::seeded(20, 7, 11);
        let e: Vec<f64> = (0..20).map(|i| libm::sin(i as f64)).collect();
        let out = p.apply(&e).unwrap();
        for o in 0..7 {
            let mut acc = 0.0;
            for i in 0..20 {
                acc += p.weights[o * 20 + i] * e[i];
            }
            assert!((out[o] - acc).abs() < 1e-6);
        }
    }

    fn small_graph(n: usize) -> (SocialGraph, EmbeddingTable) {
        let nodes = (0..n)
            .map(|i| post(&format!("t{i:02}"), NodeKind::Tweet, (i as u64, (i * 3 % 5) as u64, 2)))
            .collect();
        let g = SocialGraph::new(nodes, vec![Relation::new("t00", "t01", RelationKind::QuoteOf)]).unwrap();
        let mut emb = EmbeddingTable::new(4);
        for i in 0..n {
            emb.insert(format!("t{i:02}"), Some(Lang::En), (0..4).map(|j| (i * j) as f32 * 0.5).collect())
                .unwrap();
        }
        (g, emb)
    }

    #[test]
    fn layout_dims() {
        let (g, emb) = small_graph(5);
        let graph_only = build_features(
            &g,
            None,
            &FeatureSpec {
                modality: Modality::Graph,
                ..FeatureSpec::default()
            },
        )
        .unwrap();
        assert_eq!(graph_only.layout.total_dim, 10);
        assert!(graph_only.layout.text.is_empty());
        let l = FeatureLayout::new(Modality::Multimodal, 812, 0);
        assert_eq!(l.total_dim, 3 + 7 + 812);
        let mm = build_features(&g, Some(&emb), &FeatureSpec { d_proj: 6, ..FeatureSpec::default() }).unwrap();
        assert_eq!(mm.cols, mm.layout.total_dim);
        for d in 0..mm.cols {
            assert!(mm.layout.tag(d).is_some());
        }
    }

    #[test]
    fn normalization_and_constant_columns() {
        let (g, emb) = small_graph(9);
        let fm = build_features(&g, Some(&emb), &FeatureSpec { d_proj: 5, ..FeatureSpec::default() }).unwrap();
        for j in 0..fm.cols {
            let col: Vec<f64> = (0..fm.rows).map(|i| fm.row(i)[j] as f64).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-6, "col {j} mean {mean}");
            assert!(col.iter().all(|v| v.is_finite()));
            if var > 0.0 {
                assert!((var - 1.0).abs() < 1e-4, "col {j} var {var}");
            }
        }
        // quotes column is constant (2 everywhere) -> all zeros
        assert!((0..fm.rows).all(|i| fm.row(i)[2] == 0.0));
    }

    #[test]
    fn missing_embedding_lists_ids() {
        let (g, mut emb) = small_graph(4);
        emb.entries.remove("t02");
        let err = build_features(&g, Some(&emb), &FeatureSpec::default()).unwrap_err();
        assert_eq!(err, FeatureError::MissingEmbedding(alloc::vec!["t02".into()]));
    }

    #[test]
    fn noise_columns_extend_layout() {
        let (g, _) = small_graph(6);
        let spec = FeatureSpec {
            modality: Modality::Graph,
            ..FeatureSpec::default()
        };
        let (mut raw, _) = RawFeatures::build(&g, None, &spec).unwrap();
        raw.append_noise(4, 1, false);
        assert_eq!(raw.cols, 14);
        assert_eq!(raw.layout.noise, 10..14);
        assert_eq!(raw.layout.tag(12), Some(ModalityTag::Noise));
        let (fm, _) = raw.normalize();
        assert_eq!(fm.cols, 14);
    }
}
