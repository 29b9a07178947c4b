//! End-to-end wiring: features, split, training, explanations and the
//! protocol rounds that need retraining.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::eval::bootstrap::{bootstrap_f1, BootstrapReport};
use crate::eval::robust::{self, RobustConfig, RobustRound};
use crate::eval::trust::GatSubject;
use crate::explain::{ExplainConfig, ExplainContext, GraphExplanation};
use crate::features::{
    EmbeddingTable, FeatureMatrix, FeatureSpec, Modality, Normalizer, RawFeatures, TextProjection, DEFAULT_PROJECTION_DIM,
};
use crate::gat::{self, GatConfig, GatGraph, GatModel, Prediction, Split, TrainReport};
use crate::graph::{Label, SocialGraph};
use crate::tensor::Tensor;
use crate::text::{TextError, TextPath, TokenAttribution, ToyTextEncoder};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextMode {
    /// Precomputed sentence embeddings supplied with the graph.
    Embeddings,
    /// The toy token encoder, fitted on the graph's texts.
    Tokens,
}

impl TextMode {
    pub fn as_str(self) -> &'static str {
        match self {
            TextMode::Embeddings => "embeddings",
            TextMode::Tokens => "tokens",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "embeddings" => Some(TextMode::Embeddings),
            "tokens" => Some(TextMode::Tokens),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub modality: Modality,
    pub d_proj: usize,
    pub text_mode: TextMode,
    /// Token-table width of the toy encoder.
    pub d_tok: usize,
    /// `gat.seed` is ignored; training seeds derive from `seed`.
    pub gat: GatConfig,
    pub explain: ExplainConfig,
    pub ig_steps: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            modality: Modality::Multimodal,
            d_proj: DEFAULT_PROJECTION_DIM,
            text_mode: TextMode::Embeddings,
            d_tok: 32,
            gat: GatConfig::default(),
            explain: ExplainConfig::default(),
            ig_steps: 50,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    fn proj_seed(&self) -> u64 {
        self.seed ^ 0x6d75_3278_7072_6f6a
    }

    fn token_seed(&self) -> u64 {
        self.seed ^ 0x6d75_3278_746f_6b65
    }

    fn gat_config(&self, seed: u64) -> GatConfig {
        GatConfig {
            seed,
            ..self.gat.clone()
        }
    }
}

/// A loaded graph and, optionally, its precomputed text embeddings.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: SocialGraph,
    pub embeddings: Option<EmbeddingTable>,
}

/// Where the text block comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum TextSource {
    None,
    Embeddings,
    Tokens(ToyTextEncoder),
}

/// Everything that is fixed before training: raw features, labels, the
/// attention graph and the split.
pub struct Experiment<'d> {
    pub dataset: &'d Dataset,
    pub config: PipelineConfig,
    pub text: TextSource,
    /// Token-encoder embeddings when `text` is [`TextSource::Tokens`].
    token_embeddings: Option<EmbeddingTable>,
    pub raw: RawFeatures,
    pub projection: Option<TextProjection>,
    /// Gold label of each feature row.
    pub labels: Vec<Option<Label>>,
    pub gat_graph: GatGraph,
    pub split: Split,
    /// Test rows with at least 3 classifiable nodes within `explain.k` hops.
    pub explainable_test: Vec<usize>,
}

impl<'d> Experiment<'d> {
    pub fn prepare(dataset: &'d Dataset, config: &PipelineConfig) -> Result<Self> {
        Self::prepare_inner(dataset, config, None)
    }

    /// Token mode with a caller-supplied encoder instead of one fitted on
    /// the corpus.
    pub fn prepare_with_encoder(dataset: &'d Dataset, config: &PipelineConfig, encoder: ToyTextEncoder) -> Result<Self> {
        let config = PipelineConfig {
            text_mode: TextMode::Tokens,
            ..config.clone()
        };
        Self::prepare_inner(dataset, &config, Some(encoder))
    }

    fn prepare_inner(dataset: &'d Dataset, config: &PipelineConfig, encoder: Option<ToyTextEncoder>) -> Result<Self> {
        let g = &dataset.graph;
        let (text, token_embeddings) = if !config.modality.uses_text() {
            (TextSource::None, None)
        } else {
            match config.text_mode {
                TextMode::Embeddings => (TextSource::Embeddings, None),
                TextMode::Tokens => {
                    let enc = encoder.unwrap_or_else(|| {
                        let texts = g.classifiable().into_iter().map(|r| g.node(r).text.as_str());
                        ToyTextEncoder::fit(texts, config.d_tok, config.token_seed())
                    });
                    let table = enc.embedding_table(g)?;
                    (TextSource::Tokens(enc), Some(table))
                }
            }
        };
        let emb = match &text {
            TextSource::None => None,
            TextSource::Embeddings => dataset.embeddings.as_ref(),
            TextSource::Tokens(_) => token_embeddings.as_ref(),
        };
        let spec = FeatureSpec {
            modality: config.modality,
            d_proj: config.d_proj,
            proj_seed: config.proj_seed(),
        };
        let (raw, projection) = RawFeatures::build(g, emb, &spec)?;
        let labels: Vec<Option<Label>> = raw.graph_rows.iter().map(|&r| g.node(r).label).collect();
        let gat_graph = GatGraph::from_rows(g, &raw.graph_rows, config.gat.self_loops)?;
        let split = Split::stratified(&labels, config.seed);
        let explainable_test = split
            .test
            .iter()
            .copied()
            .filter(|&r| {
                let d = g.hop_distances(raw.graph_rows[r], config.explain.k);
                d.keys().filter(|&&n| g.node(n).is_classifiable()).count() >= 3
            })
            .collect();
        Ok(Experiment {
            dataset,
            config: config.clone(),
            text,
            token_embeddings,
            raw,
            projection,
            labels,
            gat_graph,
            split,
            explainable_test,
        })
    }

    /// Normalized features, with `n_noise` extra noise columns.
    pub fn features(&self, n_noise: usize, noise_seed: u64, constant: bool) -> (FeatureMatrix, Normalizer) {
        let mut raw = self.raw.clone();
        raw.append_noise(n_noise, noise_seed, constant);
        raw.normalize()
    }

    pub fn train(&self) -> Result<TrainedExperiment<'_, 'd>> {
        self.train_variant(0, 0, false, self.config.seed)
    }

    pub fn train_variant(&self, n_noise: usize, noise_seed: u64, constant: bool, seed: u64) -> Result<TrainedExperiment<'_, 'd>> {
        let (features, normalizer) = self.features(n_noise, noise_seed, constant);
        let x = features.to_tensor();
        let (model, report) = gat::train(&self.gat_graph, &x, &self.labels, &self.split.train, &self.config.gat_config(seed))?;
        self.assemble(features, normalizer, x, model, report)
    }

    /// Wraps an already trained model, e.g. one read from a checkpoint.
    pub fn with_model(&self, model: GatModel) -> Result<TrainedExperiment<'_, 'd>> {
        let (features, normalizer) = self.features(0, 0, false);
        let x = features.to_tensor();
        self.assemble(features, normalizer, x, model, TrainReport { loss_history: Vec::new() })
    }

    fn assemble(
        &self,
        features: FeatureMatrix,
        normalizer: Normalizer,
        x: Tensor,
        mut model: GatModel,
        report: TrainReport,
    ) -> Result<TrainedExperiment<'_, 'd>> {
        model.freeze();
        let predictions = model.predict(&self.gat_graph, &x)?;
        Ok(TrainedExperiment {
            experiment: self,
            p_mis: predictions.iter().map(|p| p.p_misinformation()).collect(),
            features,
            normalizer,
            x,
            model,
            report,
            predictions,
        })
    }

    /// One robustness round for proportion `p`: inject noise, retrain and
    /// explain a seeded sample of test nodes.
    pub fn robust_round(&self, cfg: &RobustConfig, round: usize, p: f64) -> Result<RobustRound> {
        let seed = cfg.round_seed(round);
        let n = robust::noise_count(self.raw.cols, p);
        let t = self.train_variant(n, seed ^ 0x6e6f_6973_65, cfg.constant_noise, seed)?;
        let targets = robust::pick_targets(&self.explainable_test, cfg.n_explain, seed)?;
        let ex = t.explain_rows(&targets)?;
        Ok(RobustRound::from_explanations(round, p, &t.features.layout, &ex))
    }

    fn embedding_of(&self, id: &str) -> Option<&[f32]> {
        match &self.text {
            TextSource::Embeddings => self.dataset.embeddings.as_ref()?.get(id),
            TextSource::Tokens(_) => self.token_embeddings.as_ref()?.get(id),
            TextSource::None => None,
        }
    }
}

/// A frozen model together with the features it was trained on.
pub struct TrainedExperiment<'e, 'd> {
    pub experiment: &'e Experiment<'d>,
    pub features: FeatureMatrix,
    pub normalizer: Normalizer,
    pub x: Tensor,
    pub model: GatModel,
    pub report: TrainReport,
    /// Prediction for every feature row.
    pub predictions: Vec<Prediction>,
    p_mis: Vec<f64>,
}

impl TrainedExperiment<'_, '_> {
    fn row(&self, id: &str) -> Result<usize> {
        self.features.row_index(id).ok_or_else(|| {
            let g = &self.experiment.dataset.graph;
            match g.index_of(id) {
                Ok(_) => Error::Gat(gat::GatError::UnknownNode(id.into())),
                Err(e) => e.into(),
            }
        })
    }

    pub fn prediction(&self, id: &str) -> Result<Prediction> {
        Ok(self.predictions[self.row(id)?])
    }

    /// Predicted and gold labels on the test split.
    pub fn test_labels(&self) -> (Vec<Label>, Vec<Label>) {
        let e = self.experiment;
        e.split
            .test
            .iter()
            .filter_map(|&r| e.labels[r].map(|g| (self.predictions[r].label, g)))
            .unzip()
    }

    pub fn bootstrap(&self, b: usize, seed: u64) -> Result<BootstrapReport> {
        let (p, g) = self.test_labels();
        Ok(bootstrap_f1(&p, &g, b, seed)?)
    }

    pub fn explain_context(&self) -> Result<ExplainContext<'_>> {
        Ok(ExplainContext::new(&self.experiment.dataset.graph, &self.features, &self.x, &self.p_mis)?)
    }

    pub fn explain_graph(&self, id: &str) -> Result<GraphExplanation> {
        let row = self.row(id)?;
        Ok(self.explain_context()?.explain_row(row, &self.experiment.config.explain)?)
    }

    pub fn explain_rows(&self, rows: &[usize]) -> Result<Vec<GraphExplanation>> {
        let ctx = self.explain_context()?;
        rows.iter()
            .map(|&r| ctx.explain_row(r, &self.experiment.config.explain).map_err(Error::from))
            .collect()
    }

    pub fn explain_config(&self) -> &ExplainConfig {
        &self.experiment.config.explain
    }

    fn text_path(&self) -> Result<TextPath<'_>> {
        let projection = self
            .experiment
            .projection
            .as_ref()
            .ok_or(TextError::ModeUnavailable("the model was trained without a text block"))?;
        Ok(TextPath {
            model: &self.model,
            graph: &self.experiment.gat_graph,
            x: &self.x,
            layout: &self.features.layout,
            projection,
            normalizer: &self.normalizer,
        })
    }

    /// Integrated-gradients attribution for `id`: per token with the toy
    /// encoder, per embedding dimension with precomputed embeddings.
    pub fn explain_text(&self, id: &str, steps: usize) -> Result<TokenAttribution> {
        let row = self.row(id)?;
        let node = self.experiment.dataset.graph.get(id).ok_or_else(|| Error::Gat(gat::GatError::UnknownNode(id.into())))?;
        if node.text.trim().is_empty() {
            return Err(TextError::EmptyText(id.into()).into());
        }
        let path = self.text_path()?;
        match &self.experiment.text {
            TextSource::Tokens(enc) => Ok(path.explain_tokens(row, id, enc, &node.text, steps)?),
            TextSource::Embeddings => {
                let e: Vec<f64> = self
                    .experiment
                    .embedding_of(id)
                    .ok_or(TextError::ModeUnavailable("no embedding for this node"))?
                    .iter()
                    .map(|&v| v as f64)
                    .collect();
                Ok(path.explain_embedding(row, id, &e, steps)?)
            }
            TextSource::None => Err(TextError::ModeUnavailable("the model was trained without a text block").into()),
        }
    }

    /// Token-level attribution only; fails when the text block comes from
    /// precomputed embeddings.
    pub fn explain_tokens(&self, id: &str, steps: usize) -> Result<TokenAttribution> {
        match self.experiment.text {
            TextSource::Tokens(_) => self.explain_text(id, steps),
            _ => Err(TextError::ModeUnavailable("token-level attribution needs the token encoder; only precomputed embeddings are available").into()),
        }
    }

    /// Trust-protocol subject over `rows`.
    pub fn trust_subject(&self, rows: Vec<usize>) -> Result<GatSubject<'_>> {
        GatSubject::new(
            &self.experiment.dataset.graph,
            &self.features,
            &self.experiment.gat_graph,
            &self.x,
            &self.model,
            self.experiment.config.explain.clone(),
            rows,
        )
    }

    pub fn ids(&self, rows: &[usize]) -> Vec<String> {
        rows.iter().map(|&r| self.features.ids[r].clone()).collect()
    }
}
