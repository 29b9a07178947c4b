//! JSON Lines node and edge files.
//!
//! Nodes: `{"id", "kind", "lang", "text", "n_retweets", "n_replies",
//! "n_quotes", "label"}` with `label` one of `0` (misinformation), `1`
//! (fact) or `null`. Edges: `{"src", "dst", "kind"}`. Blank lines are
//! skipped. Writers emit the canonical order of [`SocialGraph`], so
//! load → write → load is the identity.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use mu2x_core::{Label, Lang, MetadataCounts, NodeKind, PostNode, Relation, RelationKind, SocialGraph};
use serde::{Deserialize, Serialize};

use crate::error::DataError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: String,
    kind: NodeKind,
    lang: Lang,
    #[serde(default)]
    text: String,
    #[serde(default)]
    n_retweets: u64,
    #[serde(default)]
    n_replies: u64,
    #[serde(default)]
    n_quotes: u64,
    #[serde(default)]
    label: Option<Label>,
}

impl From<NodeRecord> for PostNode {
    fn from(r: NodeRecord) -> Self {
        PostNode {
            id: r.id,
            kind: r.kind,
            lang: r.lang,
            text: r.text,
            metadata: MetadataCounts {
                n_retweets: r.n_retweets,
                n_replies: r.n_replies,
                n_quotes: r.n_quotes,
            },
            label: r.label,
        }
    }
}

impl From<&PostNode> for NodeRecord {
    fn from(n: &PostNode) -> Self {
        NodeRecord {
            id: n.id.clone(),
            kind: n.kind,
            lang: n.lang,
            text: n.text.clone(),
            n_retweets: n.metadata.n_retweets,
            n_replies: n.metadata.n_replies,
            n_quotes: n.metadata.n_quotes,
            label: n.label,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeRecord {
    src: String,
    dst: String,
    kind: String,
}

/// Non-blank lines with their 1-based numbers.
fn lines<'p, R: BufRead + 'p>(reader: R, path: &'p Path) -> impl Iterator<Item = Result<(usize, String), DataError>> + 'p {
    reader.lines().enumerate().filter_map(move |(i, l)| match l {
        Ok(l) if l.trim().is_empty() => None,
        Ok(l) => Some(Ok((i + 1, l))),
        Err(e) => Some(Err(DataError::io(path, e))),
    })
}

pub(crate) fn open(path: &Path) -> Result<BufReader<File>, DataError> {
    File::open(path).map(BufReader::new).map_err(|e| DataError::io(path, e))
}

pub(crate) fn create(path: &Path) -> Result<BufWriter<File>, DataError> {
    File::create(path).map(BufWriter::new).map_err(|e| DataError::io(path, e))
}

/// Parses a nodes file; `path` is only used in error messages.
pub fn read_nodes<R: BufRead>(reader: R, path: &Path) -> Result<Vec<PostNode>, DataError> {
    let mut seen = HashSet::new();
    let mut nodes = Vec::new();
    for item in lines(reader, path) {
        let (line, text) = item?;
        let rec: NodeRecord = serde_json::from_str(&text).map_err(|e| DataError::malformed(path, line, e))?;
        if !seen.insert(rec.id.clone()) {
            return Err(DataError::DuplicateId {
                path: path.into(),
                line,
                id: rec.id,
            });
        }
        nodes.push(rec.into());
    }
    Ok(nodes)
}

/// Parses an edges file, checking endpoints against `ids` when given.
pub fn read_edges<R: BufRead>(reader: R, path: &Path, ids: Option<&HashSet<&str>>) -> Result<Vec<Relation>, DataError> {
    let mut edges = Vec::new();
    for item in lines(reader, path) {
        let (line, text) = item?;
        let rec: EdgeRecord = serde_json::from_str(&text).map_err(|e| DataError::malformed(path, line, e))?;
        let kind: RelationKind = rec.kind.parse().map_err(|_| DataError::UnknownRelationKind {
            path: path.into(),
            line,
            kind: rec.kind.clone(),
        })?;
        if let Some(ids) = ids {
            let missing = [&rec.src, &rec.dst].into_iter().find(|id| !ids.contains(id.as_str())).cloned();
            if let Some(missing) = missing {
                return Err(DataError::DanglingEdge {
                    path: path.into(),
                    line,
                    missing,
                    src: rec.src,
                    dst: rec.dst,
                });
            }
        }
        edges.push(Relation::new(rec.src, rec.dst, kind));
    }
    Ok(edges)
}

pub fn load_graph(nodes_path: &Path, edges_path: &Path) -> Result<SocialGraph, DataError> {
    let nodes = read_nodes(open(nodes_path)?, nodes_path)?;
    let ids: HashSet<&str> = nodes.iter().map(|n| n.id.as_str()).collect();
    let edges = read_edges(open(edges_path)?, edges_path, Some(&ids))?;
    SocialGraph::new(nodes, edges).map_err(|source| DataError::Graph {
        path: edges_path.into(),
        source,
    })
}

pub fn write_nodes<W: Write>(mut w: W, nodes: &[PostNode]) -> std::io::Result<()> {
    for n in nodes {
        serde_json::to_writer(&mut w, &NodeRecord::from(n))?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_edges<W: Write>(mut w: W, edges: &[Relation]) -> std::io::Result<()> {
    for e in edges {
        let rec = EdgeRecord {
            src: e.src.clone(),
            dst: e.dst.clone(),
            kind: e.kind.as_str().into(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Writes both files in canonical order.
pub fn save_graph(g: &SocialGraph, nodes_path: &Path, edges_path: &Path) -> Result<(), DataError> {
    write_nodes(create(nodes_path)?, g.nodes()).map_err(|e| DataError::io(nodes_path, e))?;
    write_edges(create(edges_path)?, g.edges()).map_err(|e| DataError::io(edges_path, e))
}
