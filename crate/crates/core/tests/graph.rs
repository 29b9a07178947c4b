use std::collections::{BTreeSet, VecDeque};

use mu2x_core::{Lang, MetadataCounts, NodeKind, PostNode, Relation, RelationKind, SocialGraph};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn tweet(id: String) -> PostNode {
    PostNode {
        id,
        kind: NodeKind::Tweet,
        lang: Lang::En,
        text: String::new(),
        metadata: MetadataCounts::default(),
        label: None,
    }
}

fn random_graph(seed: u64, n: usize, p: f64) -> (SocialGraph, Vec<(usize, usize)>) {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<PostNode> = (0..n).map(|i| tweet(format!("n{i:02}"))).collect();
    let mut pairs = Vec::new();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.random_bool(p) {
                pairs.push((i, j));
                edges.push(Relation::new(format!("n{i:02}"), format!("n{j:02}"), RelationKind::Retweeted));
            }
        }
    }
    (SocialGraph::new(nodes, edges).unwrap(), pairs)
}

/// Textbook BFS over an undirected adjacency built from the raw pairs.
fn bfs(n: usize, pairs: &[(usize, usize)], root: usize, k: usize) -> BTreeSet<usize> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in pairs {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![usize::MAX; n];
    dist[root] = 0;
    let mut q = VecDeque::from([root]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    (0..n).filter(|&i| dist[i] <= k).collect()
}

#[test]
fn two_hop_matches_bfs_on_random_graph() {
    for seed in 0..5 {
        let (g, pairs) = random_graph(seed, 50, 0.03);
        for root in 0..50 {
            // ids are zero-padded, so graph index equals construction index
            let got: BTreeSet<usize> = g.k_hop_subgraph(root, 2).into_iter().collect();
            assert_eq!(got, bfs(50, &pairs, root, 2), "seed {seed} root {root}");
        }
    }
}

#[test]
fn k_hop_ids_and_errors() {
    let (g, _) = random_graph(1, 10, 0.2);
    assert_eq!(g.k_hop_ids("n03", 0).unwrap(), vec!["n03"]);
    assert!(g.k_hop_ids("zz", 1).is_err());
}

#[test]
fn insertion_order_does_not_matter() {
    let (g, _) = random_graph(7, 20, 0.1);
    let mut nodes = g.nodes().to_vec();
    let mut edges = g.edges().to_vec();
    let rng = &mut ChaCha8Rng::seed_from_u64(1);
    nodes.shuffle(rng);
    edges.shuffle(rng);
    let h = SocialGraph::new(nodes, edges).unwrap();
    assert_eq!(g.nodes(), h.nodes());
    assert_eq!(g.edges(), h.edges());
    for i in 0..20 {
        assert_eq!(g.neighbors(i), h.neighbors(i));
    }
}

#[test]
fn adjacency_mirrors_every_edge() {
    let (g, _) = random_graph(3, 30, 0.05);
    for e in g.edges() {
        let (s, d) = (g.index_of(&e.src).unwrap(), g.index_of(&e.dst).unwrap());
        assert!(g.neighbors(s).iter().any(|n| n.node == d && n.kind == e.kind));
        assert!(g.neighbors(d).iter().any(|n| n.node == s && n.kind == e.kind));
    }
}

proptest! {
    #[test]
    fn k_hop_is_monotone_in_k(seed in any::<u64>(), root in 0usize..30, k in 0usize..5) {
        let (g, _) = random_graph(seed, 30, 0.04);
        let small: BTreeSet<usize> = g.k_hop_subgraph(root, k).into_iter().collect();
        let big: BTreeSet<usize> = g.k_hop_subgraph(root, k + 1).into_iter().collect();
        prop_assert!(small.is_subset(&big));
        prop_assert!(small.contains(&root));
    }
}
