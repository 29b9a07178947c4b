//! Explainable misinformation detection on heterogeneous social graphs.
//!
//! The crate is `no_std` (it needs `alloc`) and contains every numerical
//! piece of the pipeline:
//!
//! - [`graph`]: typed social graph (claims, tweets, replies, users) with
//!   k-hop neighborhood queries.
//! - [`features`]: per-node multimodal vectors (engagement metadata,
//!   structural degree statistics, projected text embeddings) with a layout
//!   that maps every column back to its modality.
//! - [`tensor`]: a small reverse-mode differentiation tape over dense
//!   matrices.
//! - [`gat`]: two-layer graph attention classifier trained with Adam.
//! - [`explain`]: HSIC-Lasso local explanations over k-hop neighborhoods.
//! - [`text`]: toy token encoder and integrated-gradients attributions.
//! - [`eval`]: bootstrap F1, modality statistics, trustworthiness and
//!   robustness protocols.
//! - [`synth`]: seeded synthetic corpora with planted class signal.
//!
//! File formats, checkpoints, the CLI and parallel round execution live in
//! the companion `mu2x` crate.

#![no_std]

extern crate alloc;

pub mod eval;
pub mod explain;
pub mod features;
pub mod gat;
pub mod graph;
pub mod linalg;
pub mod pipeline;
pub mod synth;
pub mod tensor;
pub mod text;

mod math;

pub use explain::{ExplainConfig, GraphExplanation};
pub use features::{FeatureLayout, FeatureMatrix, Modality, ModalityTag};
pub use gat::{GatConfig, GatModel, Prediction};
pub use graph::{Label, Lang, MetadataCounts, NodeKind, PostNode, Relation, RelationKind, SocialGraph};
pub use pipeline::{Dataset, Experiment, PipelineConfig, TextSource, TrainedExperiment};
pub use tensor::{Tape, Tensor, Var};
pub use text::{TokenAttribution, ToyTextEncoder};

/// Top-level error that any pipeline stage can produce.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Graph(#[from] graph::GraphError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Tensor(#[from] tensor::TensorError),
    #[error(transparent)]
    Gat(#[from] gat::GatError),
    #[error(transparent)]
    Explain(#[from] explain::ExplainError),
    #[error(transparent)]
    Text(#[from] text::TextError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
}

impl Error {
    /// True for failures of the numerics (divergence, non-convergence) as
    /// opposed to bad input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Gat(gat::GatError::NonFiniteLoss { .. })
                | Error::Explain(explain::ExplainError::NonConvergence { .. })
        )
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
