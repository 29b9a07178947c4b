//! Model checkpoints: the pipeline configuration plus every GAT parameter,
//! row-major, each value written as a decimal string so it reads back
//! bit-for-bit.
//!
//! A checkpoint does not contain the data. Restoring it rebuilds the
//! features from the same graph files and checks that the feature layout
//! and row count still match.

use std::io::Write;
use std::path::Path;

use mu2x_core::gat::AttentionHead;
use mu2x_core::{Experiment, FeatureLayout, GatConfig, GatModel, PipelineConfig, Tensor, TrainedExperiment};
use serde::{Deserialize, Serialize};

use crate::error::DataError;
use crate::io::{create, open};

pub const FORMAT: &str = "mu2x-checkpoint/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<String>,
}

impl Matrix {
    fn from_tensor(t: &Tensor) -> Self {
        Matrix {
            rows: t.rows(),
            cols: t.cols(),
            data: t.as_slice().iter().map(|v| format!("{v:e}")).collect(),
        }
    }

    fn to_tensor(&self) -> Result<Tensor, String> {
        if self.data.len() != self.rows * self.cols {
            return Err(format!("{}x{} matrix holds {} values", self.rows, self.cols, self.data.len()));
        }
        let data = self
            .data
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| format!("`{s}` is not a number")))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Tensor::from_vec(self.rows, self.cols, data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Head {
    pub w: Matrix,
    pub att_target: Matrix,
    pub att_neighbor: Matrix,
}

impl Head {
    fn from_head(h: &AttentionHead) -> Self {
        Head {
            w: Matrix::from_tensor(&h.w),
            att_target: Matrix::from_tensor(&h.att_target),
            att_neighbor: Matrix::from_tensor(&h.att_neighbor),
        }
    }

    fn to_head(&self) -> Result<AttentionHead, String> {
        Ok(AttentionHead {
            w: self.w.to_tensor()?,
            att_target: self.att_target.to_tensor()?,
            att_neighbor: self.att_neighbor.to_tensor()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub pipeline: PipelineConfig,
    /// Layout and row count of the features the model was trained on.
    pub layout: FeatureLayout,
    pub n_rows: usize,
    /// Training configuration of the model itself, seed included.
    pub gat: GatConfig,
    pub input_dim: usize,
    pub layer1: Vec<Head>,
    pub layer2: Head,
}

impl Checkpoint {
    pub fn new(t: &TrainedExperiment<'_, '_>) -> Self {
        let m = &t.model;
        Checkpoint {
            format: FORMAT.into(),
            pipeline: t.experiment.config.clone(),
            layout: t.features.layout.clone(),
            n_rows: t.features.rows,
            gat: m.config.clone(),
            input_dim: m.input_dim,
            layer1: m.layer1.iter().map(Head::from_head).collect(),
            layer2: Head::from_head(&m.layer2),
        }
    }

    pub fn model(&self) -> Result<GatModel, String> {
        let layer1 = self.layer1.iter().map(Head::to_head).collect::<Result<Vec<_>, _>>()?;
        let layer2 = self.layer2.to_head()?;
        let first = layer1.first().ok_or("checkpoint has no layer-1 heads")?;
        if first.w.rows() != self.input_dim || layer1.iter().any(|h| h.w.shape() != first.w.shape()) {
            return Err("layer-1 weight shapes disagree with input_dim".into());
        }
        Ok(GatModel {
            config: self.gat.clone(),
            input_dim: self.input_dim,
            layer1,
            layer2,
            frozen: true,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut w = create(path)?;
        serde_json::to_writer_pretty(&mut w, self)
            .map_err(std::io::Error::from)
            .and_then(|_| w.write_all(b"\n"))
            .and_then(|_| w.flush())
            .map_err(|e| DataError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let c: Checkpoint = serde_json::from_reader(open(path)?).map_err(|e| DataError::Checkpoint {
            path: path.into(),
            msg: e.to_string(),
        })?;
        if c.format != FORMAT {
            return Err(DataError::Checkpoint {
                path: path.into(),
                msg: format!("unsupported format `{}`", c.format),
            });
        }
        Ok(c)
    }

    /// Attaches the stored model to `e`, which must have been prepared
    /// from the same data with [`Checkpoint::pipeline`].
    pub fn restore<'e, 'd>(&self, e: &'e Experiment<'d>, path: &Path) -> Result<TrainedExperiment<'e, 'd>, crate::Error> {
        let bad = |msg: String| DataError::Checkpoint { path: path.into(), msg };
        if e.raw.layout != self.layout || e.raw.rows() != self.n_rows {
            return Err(bad(format!(
                "model was trained on {} rows x {} features, the data gives {} x {}",
                self.n_rows,
                self.layout.total_dim,
                e.raw.rows(),
                e.raw.layout.total_dim
            ))
            .into());
        }
        let model = self.model().map_err(bad)?;
        Ok(e.with_model(model)?)
    }
}
