use std::io;
use std::path::PathBuf;

use mu2x_core::features::FeatureError;
use mu2x_core::graph::GraphError;

/// Problems with input or output files. Every variant names the file and,
/// for line-oriented formats, the 1-based line.
#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{}:{line}: malformed record: {msg}", path.display())]
    MalformedRecord { path: PathBuf, line: usize, msg: String },
    #[error("{}:{line}: unknown relation kind `{kind}`", path.display())]
    UnknownRelationKind { path: PathBuf, line: usize, kind: String },
    #[error("{}:{line}: edge {src} -> {dst} references missing node `{missing}`", path.display())]
    DanglingEdge {
        path: PathBuf,
        line: usize,
        src: String,
        dst: String,
        missing: String,
    },
    #[error("{}:{line}: duplicate id `{id}`", path.display())]
    DuplicateId { path: PathBuf, line: usize, id: String },
    #[error("{}: {source}", path.display())]
    Graph {
        path: PathBuf,
        #[source]
        source: GraphError,
    },
    #[error("{}: {source}", path.display())]
    Feature {
        path: PathBuf,
        #[source]
        source: FeatureError,
    },
    #[error("{}: {msg}", path.display())]
    Checkpoint { path: PathBuf, msg: String },
}

impl DataError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        DataError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, line: usize, msg: impl ToString) -> Self {
        DataError::MalformedRecord {
            path: path.into(),
            line,
            msg: msg.to_string(),
        }
    }
}
