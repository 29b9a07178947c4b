use std::collections::HashMap;

use mu2x_core::synth::{self, SignalStrength, SynthConfig};
use mu2x_core::{Dataset, Experiment, Label, Modality, NodeKind, PipelineConfig, RelationKind, SocialGraph};
use proptest::prelude::*;

fn dataset(cfg: &SynthConfig) -> Dataset {
    let c = synth::generate(cfg).unwrap();
    let graph = SocialGraph::new(c.nodes, c.edges).unwrap();
    c.embeddings.bind(&graph).unwrap();
    Dataset {
        graph,
        embeddings: Some(c.embeddings),
    }
}

fn tweet_rate(cfg: &SynthConfig) -> f64 {
    let c = synth::generate(cfg).unwrap();
    let tweets: Vec<_> = c.nodes.iter().filter(|n| n.kind == NodeKind::Tweet).collect();
    tweets.iter().filter(|n| n.label == Some(Label::Misinformation)).count() as f64 / tweets.len() as f64
}

#[test]
fn label_rate_tracks_configuration() {
    for (rate, seed) in [(0.5, 1), (0.3, 2), (0.72, 3)] {
        let cfg = SynthConfig {
            n_tweets: 1000,
            misinformation_rate: rate,
            embedding_dim: 4,
            seed,
            ..SynthConfig::default()
        };
        assert!((tweet_rate(&cfg) - rate).abs() <= 0.02, "rate {rate}");
    }
}

#[test]
fn same_seed_same_corpus() {
    let cfg = SynthConfig {
        n_tweets: 300,
        embedding_dim: 8,
        seed: 11,
        ..SynthConfig::default()
    };
    assert_eq!(synth::generate(&cfg).unwrap(), synth::generate(&cfg).unwrap());
    let other = SynthConfig { seed: 12, ..cfg.clone() };
    assert_ne!(synth::generate(&cfg).unwrap(), synth::generate(&other).unwrap());
}

fn mean_retweets(cfg: &SynthConfig, label: Label) -> f64 {
    let c = synth::generate(cfg).unwrap();
    let v: Vec<f64> = c
        .nodes
        .iter()
        .filter(|n| n.kind == NodeKind::Tweet && n.label == Some(label))
        .map(|n| n.metadata.n_retweets as f64)
        .collect();
    v.iter().sum::<f64>() / v.len() as f64
}

#[test]
fn misinformation_draws_more_engagement() {
    let cfg = SynthConfig {
        n_tweets: 1000,
        embedding_dim: 4,
        seed: 4,
        ..SynthConfig::default()
    };
    assert!(mean_retweets(&cfg, Label::Misinformation) > 1.5 * mean_retweets(&cfg, Label::Fact));
}

/// Share of retweet edges whose user leans the same way as the tweet, with
/// a user's leaning read off the majority label of what they retweet.
fn retweets_same_class(cfg: &SynthConfig) -> f64 {
    let c = synth::generate(cfg).unwrap();
    let label: HashMap<&str, Label> = c.nodes.iter().filter_map(|n| Some((n.id.as_str(), n.label?))).collect();
    let mut tally: HashMap<&str, [usize; 2]> = HashMap::new();
    let rts: Vec<_> = c.edges.iter().filter(|e| e.kind == RelationKind::Retweeted).collect();
    for e in &rts {
        tally.entry(e.src.as_str()).or_default()[label[e.dst.as_str()].index()] += 1;
    }
    let same = rts
        .iter()
        .filter(|e| {
            let t = tally[e.src.as_str()];
            let lean = if t[1] > t[0] { 1 } else { 0 };
            lean == label[e.dst.as_str()].index()
        })
        .count();
    same as f64 / rts.len() as f64
}

#[test]
fn retweets_are_homophilous_only_with_graph_signal() {
    let base = SynthConfig {
        n_tweets: 1000,
        embedding_dim: 4,
        seed: 8,
        ..SynthConfig::default()
    };
    let strong = retweets_same_class(&base);
    let none = retweets_same_class(&SynthConfig {
        signal: SignalStrength { graph: 0.0, ..base.signal },
        ..base
    });
    assert!(strong > 0.85, "{strong}");
    assert!(none < strong - 0.2, "{none} vs {strong}");
}

#[test]
fn output_passes_feature_validation() {
    let ds = dataset(&SynthConfig {
        n_tweets: 200,
        n_replies: 20,
        n_users: 30,
        n_claims: 6,
        embedding_dim: 16,
        seed: 9,
        ..SynthConfig::default()
    });
    for modality in [Modality::Graph, Modality::Text, Modality::Multimodal] {
        let cfg = PipelineConfig {
            modality,
            ..PipelineConfig::default()
        };
        Experiment::prepare(&ds, &cfg).unwrap();
    }
}

#[test]
fn null_signal_gives_chance_f1() {
    let mut scores = Vec::new();
    for seed in 0..5 {
        let ds = dataset(&SynthConfig {
            n_tweets: 1000,
            n_replies: 100,
            n_users: 150,
            n_claims: 20,
            embedding_dim: 32,
            signal: SignalStrength::uniform(0.0),
            seed,
            ..SynthConfig::default()
        });
        let cfg = PipelineConfig {
            modality: Modality::Multimodal,
            seed,
            ..PipelineConfig::default()
        };
        let e = Experiment::prepare(&ds, &cfg).unwrap();
        let t = e.train().unwrap();
        scores.push(t.bootstrap(1, seed).unwrap().point_f1);
    }
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    assert!((mean - 0.5).abs() <= 0.05, "{scores:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn every_edge_endpoint_exists(seed in any::<u64>(), n in 1usize..80, users in 1usize..20, claims in 1usize..6) {
        let c = synth::generate(&SynthConfig {
            n_tweets: n,
            n_replies: n / 4,
            n_users: users,
            n_claims: claims,
            embedding_dim: 3,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let g = SocialGraph::new(c.nodes, c.edges);
        prop_assert!(g.is_ok());
        prop_assert!(c.embeddings.bind(&g.unwrap()).is_ok());
    }
}
