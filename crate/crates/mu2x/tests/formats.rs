use std::fs;

use mu2x::embeddings::{read_embeddings, save_embeddings, EmbeddingFormat};
use mu2x::io::{load_graph, save_graph};
use mu2x::{load_dataset, synthetic_dataset, Checkpoint, DataError, Error};
use mu2x_core::features::EmbeddingTable;
use mu2x_core::synth::SynthConfig;
use mu2x_core::{
    Experiment, Label, Lang, MetadataCounts, Modality, NodeKind, PipelineConfig, PostNode, Relation,
    RelationKind, SocialGraph,
};
use proptest::prelude::*;

fn small_synth(seed: u64) -> SynthConfig {
    SynthConfig {
        n_tweets: 120,
        n_replies: 12,
        n_users: 30,
        n_claims: 6,
        embedding_dim: 8,
        seed,
        ..SynthConfig::default()
    }
}

#[test]
fn synthetic_corpus_survives_files() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset(&small_synth(4)).unwrap();
    let (n, e) = (dir.path().join("n.jsonl"), dir.path().join("e.jsonl"));
    save_graph(&ds.graph, &n, &e).unwrap();
    let emb = ds.embeddings.as_ref().unwrap();
    for (name, fmt) in [("x.jsonl", EmbeddingFormat::Jsonl), ("x.bin", EmbeddingFormat::Binary)] {
        let p = dir.path().join(name);
        save_embeddings(emb, &p, fmt).unwrap();
        let back = load_dataset(&n, &e, Some(&p)).unwrap();
        assert_eq!(back.graph.nodes(), ds.graph.nodes());
        assert_eq!(back.graph.edges(), ds.graph.edges());
        let mut want = emb.clone();
        if fmt == EmbeddingFormat::Binary {
            // the packed form has no language field
            want.entries.values_mut().for_each(|e| e.lang = None);
        }
        assert_eq!(back.embeddings, Some(want), "{name}");
    }
}

#[test]
fn data_errors_name_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let (n, e) = (dir.path().join("n.jsonl"), dir.path().join("e.jsonl"));
    fs::write(&n, "{\"id\":\"a\",\"kind\":\"tweet\",\"lang\":\"en\"}\n\n{\"id\":\"b\",\"kind\":\"tweet\",\"lang\":\"en\"}\n").unwrap();
    fs::write(&e, "{\"src\":\"a\",\"dst\":\"b\",\"kind\":\"retweeted\"}\n{\"src\":\"a\",\"dst\":\"zz\",\"kind\":\"retweeted\"}\n").unwrap();
    match load_graph(&n, &e) {
        Err(DataError::DanglingEdge { line, missing, .. }) => assert_eq!((line, missing.as_str()), (2, "zz")),
        other => panic!("{other:?}"),
    }
    fs::write(&e, "{\"src\":\"a\",\"dst\":\"b\",\"kind\":\"liked\"}\n").unwrap();
    assert!(matches!(load_graph(&n, &e), Err(DataError::UnknownRelationKind { line: 1, .. })));
    fs::write(&n, "{\"id\":\"a\",\"kind\":\"tweet\",\"lang\":\"en\"}\n{\"id\":\"a\",\"kind\":\"reply\",\"lang\":\"en\"}\n").unwrap();
    assert!(matches!(load_graph(&n, &e), Err(DataError::DuplicateId { line: 2, .. })));
    let missing = dir.path().join("nope.jsonl");
    let err = Error::from(load_graph(&missing, &e).unwrap_err());
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("nope.jsonl"));
}

#[test]
fn embeddings_for_unknown_nodes_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset(&small_synth(1)).unwrap();
    let (n, e, x) = (dir.path().join("n"), dir.path().join("e"), dir.path().join("x"));
    save_graph(&ds.graph, &n, &e).unwrap();
    let mut t = EmbeddingTable::new(2);
    t.insert("ghost", None, vec![0.0, 1.0]).unwrap();
    save_embeddings(&t, &x, EmbeddingFormat::Binary).unwrap();
    let err = load_dataset(&n, &e, Some(&x)).unwrap_err();
    assert!(matches!(err, Error::Data(DataError::Feature { .. })), "{err:?}");
}

#[test]
fn checkpoint_restores_identical_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let ds = synthetic_dataset(&small_synth(8)).unwrap();
    let cfg = PipelineConfig {
        modality: Modality::Multimodal,
        d_proj: 8,
        seed: 8,
        ..PipelineConfig::default()
    };
    let e = Experiment::prepare(&ds, &cfg).unwrap();
    let t = e.train().unwrap();
    let path = dir.path().join("m.json");
    Checkpoint::new(&t).save(&path).unwrap();
    let ckpt = Checkpoint::load(&path).unwrap();
    let r = ckpt.restore(&e, &path).unwrap();
    assert_eq!(r.predictions, t.predictions);
    assert_eq!(r.model.layer1, t.model.layer1);
    assert_eq!(r.model.layer2, t.model.layer2);
    let again = dir.path().join("m2.json");
    ckpt.save(&again).unwrap();
    assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());

    // a model for a different feature layout is refused
    let other = Experiment::prepare(&ds, &PipelineConfig { modality: Modality::Graph, ..cfg }).unwrap();
    assert!(matches!(ckpt.restore(&other, &path), Err(Error::Data(DataError::Checkpoint { .. }))));
}

fn arb_node() -> impl Strategy<Value = PostNode> {
    (
        "[a-z0-9_]{1,8}",
        prop::sample::select(NodeKind::ALL),
        prop::sample::select(Lang::ALL),
        "\\PC{0,30}",
        (any::<u32>(), any::<u32>(), any::<u32>()),
        prop::option::of(prop::bool::ANY),
    )
        .prop_map(|(id, kind, lang, text, (a, b, c), label)| PostNode {
            id,
            kind,
            lang,
            text,
            metadata: MetadataCounts {
                n_retweets: a.into(),
                n_replies: b.into(),
                n_quotes: c.into(),
            },
            label: label
                .filter(|_| kind != NodeKind::User)
                .map(|m| if m { Label::Misinformation } else { Label::Fact }),
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn graph_files_round_trip(
        nodes in prop::collection::vec(arb_node(), 1..12),
        picks in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>(), prop::sample::select(RelationKind::ALL)), 0..20),
    ) {
        let mut nodes = nodes;
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        nodes.dedup_by(|a, b| a.id == b.id);
        // keep only edges whose kind fits their endpoint kinds
        let edges: Vec<Relation> = picks
            .iter()
            .map(|(s, d, k)| Relation::new(s.get(&nodes).id.clone(), d.get(&nodes).id.clone(), *k))
            .filter(|r| SocialGraph::new(nodes.clone(), vec![r.clone()]).is_ok())
            .collect();
        let g = SocialGraph::new(nodes, edges).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let (n, e) = (dir.path().join("n"), dir.path().join("e"));
        save_graph(&g, &n, &e).unwrap();
        let back = load_graph(&n, &e).unwrap();
        prop_assert_eq!(back.nodes(), g.nodes());
        prop_assert_eq!(back.edges(), g.edges());
    }

    #[test]
    fn embedding_files_round_trip_bit_exact(
        dim in 1usize..6,
        rows in prop::collection::btree_map("[a-z]{1,6}", (prop::option::of(prop::sample::select(Lang::ALL)), prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 6)), 1..8),
        binary in any::<bool>(),
    ) {
        let mut t = EmbeddingTable::new(dim);
        for (id, (lang, v)) in rows {
            t.insert(id, lang, v[..dim].to_vec()).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        let fmt = if binary { EmbeddingFormat::Binary } else { EmbeddingFormat::Jsonl };
        save_embeddings(&t, &p, fmt).unwrap();
        let back = read_embeddings(&p).unwrap();
        prop_assert_eq!(back.dim, t.dim);
        prop_assert_eq!(back.entries.len(), t.entries.len());
        for (id, e) in &t.entries {
            let b = &back.entries[id];
            prop_assert_eq!(b.lang, if binary { None } else { e.lang });
            let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(&b.vector), bits(&e.vector));
        }
    }
}
