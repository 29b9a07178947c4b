//! File formats, checkpoints, parallel protocol runners and the `mu2x`
//! command-line tool, on top of the `mu2x-core` pipeline.
//!
//! - [`io`]: JSON Lines node and edge files.
//! - [`embeddings`]: text-embedding files (JSON Lines and `MU2XEMB1` binary).
//! - [`checkpoint`]: model checkpoints with exact parameter round-trip.
//! - [`config`]: flat `key = value` run configuration.
//! - [`runner`]: evaluation protocols with rounds spread over a thread pool.
//! - [`report`]: JSON reports and `x,y,series` plot data.
//! - [`cli`]: the command-line front end.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod embeddings;
pub mod error;
pub mod io;
pub mod report;
pub mod runner;

use std::path::Path;

pub use checkpoint::Checkpoint;
pub use config::{ConfigError, RunConfig};
pub use error::DataError;
use mu2x_core::synth::{self, SynthConfig, SynthCorpus};
use mu2x_core::{Dataset, SocialGraph};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Core(#[from] mu2x_core::Error),
}

impl Error {
    /// 2 for usage and configuration mistakes, 3 for bad data, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Data(_) => 3,
            Error::Core(e) if e.is_numeric() => 4,
            Error::Core(_) => 3,
        }
    }
}

impl From<mu2x_core::eval::EvalError> for Error {
    fn from(e: mu2x_core::eval::EvalError) -> Self {
        Error::Core(e.into())
    }
}

/// Loads a graph and, optionally, embeddings that must all belong to it.
pub fn load_dataset(nodes: &Path, edges: &Path, embeddings: Option<&Path>) -> Result<Dataset, Error> {
    let graph = io::load_graph(nodes, edges)?;
    let embeddings = match embeddings {
        Some(p) => {
            let t = embeddings::read_embeddings(p)?;
            t.bind(&graph).map_err(|source| DataError::Feature { path: p.into(), source })?;
            Some(t)
        }
        None => None,
    };
    Ok(Dataset { graph, embeddings })
}

/// A synthetic corpus as an in-memory dataset.
pub fn synthetic_dataset(cfg: &SynthConfig) -> Result<Dataset, Error> {
    let SynthCorpus { nodes, edges, embeddings } = synth::generate(cfg).map_err(mu2x_core::Error::from)?;
    let graph = SocialGraph::new(nodes, edges).map_err(mu2x_core::Error::from)?;
    Ok(Dataset {
        graph,
        embeddings: Some(embeddings),
    })
}
