//! Heterogeneous social graph: claims, tweets, replies and users connected
//! by six relation kinds.
//!
//! A [`SocialGraph`] is validated once at construction and immutable after
//! that. Nodes are stored in lexicographic id order, which is the ordering
//! every downstream stage uses for determinism.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("edge {src} -> {dst} references missing node `{missing}`")]
    DanglingEdge {
        src: String,
        dst: String,
        missing: String,
    },
    #[error("{kind} edge {src} -> {dst} violates the endpoint kind constraint")]
    RelationConstraint {
        kind: RelationKind,
        src: String,
        dst: String,
    },
    #[error("user node `{0}` carries a label")]
    LabeledUser(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown {what} `{value}`")]
    UnknownVariant { what: &'static str, value: String },
}

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $what:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = GraphError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(GraphError::UnknownVariant { what: $what, value: other.into() }),
                }
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(self.as_str())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = <alloc::borrow::Cow<'de, str>>::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    };
}

string_enum!(
    /// Entity type of a graph node.
    NodeKind, "node kind", {
        Claim => "claim",
        Tweet => "tweet",
        Reply => "reply",
        User => "user",
    }
);

string_enum!(
    /// Supported post languages.
    Lang, "language", {
        En => "en",
        Es => "es",
        Pt => "pt",
    }
);

string_enum!(
    /// Relation kinds, in the fixed order used by structural features.
    RelationKind, "relation kind", {
        Posted => "posted",
        Mentions => "mentions",
        Retweeted => "retweeted",
        QuoteOf => "quote_of",
        ReplyTo => "reply_to",
        Discusses => "discusses",
    }
);

impl RelationKind {
    /// Position of this kind in [`RelationKind::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Class label. Serialized as the integers `0` and `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Misinformation = 0,
    Fact = 1,
}

impl Label {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        match i {
            0 => Some(Label::Misinformation),
            1 => Some(Label::Fact),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Misinformation => "misinformation",
            Label::Fact => "fact",
        })
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*self as u8)
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_index(v as usize)
            .ok_or_else(|| serde::de::Error::custom(alloc::format!("label must be 0 or 1, got {v}")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetadataCounts {
    pub n_retweets: u64,
    pub n_replies: u64,
    pub n_quotes: u64,
}

/// A claim, tweet, reply or user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostNode {
    pub id: String,
    pub kind: NodeKind,
    pub lang: Lang,
    pub text: String,
    pub metadata: MetadataCounts,
    pub label: Option<Label>,
}

impl PostNode {
    /// Every non-user node is a classification target.
    pub fn is_classifiable(&self) -> bool {
        self.kind != NodeKind::User
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub src: String,
    pub dst: String,
    pub kind: RelationKind,
}

impl Relation {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, kind: RelationKind) -> Self {
        Relation {
            src: src.into(),
            dst: dst.into(),
            kind,
        }
    }
}

/// One entry of a node's undirected neighbor list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub kind: RelationKind,
}

#[derive(Debug, Clone)]
pub struct SocialGraph {
    nodes: Vec<PostNode>,
    index: BTreeMap<String, usize>,
    edges: Vec<Relation>,
    adjacency: Vec<Vec<Neighbor>>,
}

impl SocialGraph {
    /// Validates and indexes the given nodes and edges.
    ///
    /// Nodes are reordered by id and edges by `(src, dst, kind)`, so the
    /// result does not depend on input order.
    pub fn new(mut nodes: Vec<PostNode>, mut edges: Vec<Relation>) -> Result<Self, GraphError> {
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut index = BTreeMap::new();
        for (i, node) in nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return Err(GraphError::DuplicateId(node.id.clone()));
            }
            if node.kind == NodeKind::User && node.label.is_some() {
                return Err(GraphError::LabeledUser(node.id.clone()));
            }
        }

        edges.sort();
        let mut adjacency = alloc::vec![Vec::new(); nodes.len()];
        for edge in &edges {
            let lookup = |id: &String| {
                index.get(id).copied().ok_or_else(|| GraphError::DanglingEdge {
                    src: edge.src.clone(),
                    dst: edge.dst.clone(),
                    missing: id.clone(),
                })
            };
            let s = lookup(&edge.src)?;
            let d = lookup(&edge.dst)?;
            let violates = match edge.kind {
                RelationKind::Posted => nodes[s].kind != NodeKind::User,
                RelationKind::Discusses => nodes[d].kind != NodeKind::Claim,
                _ => false,
            };
            if violates {
                return Err(GraphError::RelationConstraint {
                    kind: edge.kind,
                    src: edge.src.clone(),
                    dst: edge.dst.clone(),
                });
            }
            adjacency[s].push(Neighbor { node: d, kind: edge.kind });
            if s != d {
                adjacency[d].push(Neighbor { node: s, kind: edge.kind });
            }
        }

        Ok(SocialGraph {
            nodes,
            index,
            edges,
            adjacency,
        })
    }

    pub fn empty() -> Self {
        SocialGraph {
            nodes: Vec::new(),
            index: BTreeMap::new(),
            edges: Vec::new(),
            adjacency: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in lexicographic id order.
    pub fn nodes(&self) -> &[PostNode] {
        &self.nodes
    }

    /// Edges in canonical `(src, dst, kind)` order.
    pub fn edges(&self) -> &[Relation] {
        &self.edges
    }

    pub fn node(&self, idx: usize) -> &PostNode {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: &str) -> Result<usize, GraphError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| GraphError::UnknownNode(id.into()))
    }

    pub fn get(&self, id: &str) -> Option<&PostNode> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    /// Undirected neighbor list of `idx`, one entry per incident edge.
    pub fn neighbors(&self, idx: usize) -> &[Neighbor] {
        &self.adjacency[idx]
    }

    /// Number of incident edges of each relation kind, in
    /// [`RelationKind::ALL`] order.
    pub fn relation_degrees(&self, idx: usize) -> [usize; 6] {
        let mut deg = [0usize; 6];
        for n in &self.adjacency[idx] {
            deg[n.kind.index()] += 1;
        }
        deg
    }

    /// All nodes within `k` undirected hops of `root` (root included), as
    /// sorted node indices.
    pub fn k_hop_subgraph(&self, root: usize, k: usize) -> Vec<usize> {
        let mut seen = BTreeSet::new();
        seen.insert(root);
        let mut queue = VecDeque::new();
        queue.push_back((root, 0usize));
        while let Some((node, depth)) = queue.pop_front() {
            if depth == k {
                continue;
            }
            for n in &self.adjacency[node] {
                if seen.insert(n.node) {
                    queue.push_back((n.node, depth + 1));
                }
            }
        }
        seen.into_iter().collect()
    }

    /// Like [`SocialGraph::k_hop_subgraph`] but keyed by id.
    pub fn k_hop_ids(&self, root: &str, k: usize) -> Result<Vec<&str>, GraphError> {
        let r = self.index_of(root)?;
        Ok(self
            .k_hop_subgraph(r, k)
            .into_iter()
            .map(|i| self.nodes[i].id.as_str())
            .collect())
    }

    /// Hop distance from `root` to every node reached within `k` hops.
    pub fn hop_distances(&self, root: usize, k: usize) -> BTreeMap<usize, usize> {
        let mut dist = BTreeMap::new();
        dist.insert(root, 0);
        let mut queue = VecDeque::new();
        queue.push_back(root);
        while let Some(node) = queue.pop_front() {
            let d = dist[&node];
            if d == k {
                continue;
            }
            for n in &self.adjacency[node] {
                if !dist.contains_key(&n.node) {
                    dist.insert(n.node, d + 1);
                    queue.push_back(n.node);
                }
            }
        }
        dist
    }

    /// Indices of classifiable (non-user) nodes, ascending.
    pub fn classifiable(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].is_classifiable())
            .collect()
    }
}
