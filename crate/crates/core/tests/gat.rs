use mu2x_core::gat::{self, attention_coefficients, AttentionHead, GatGraph};
use mu2x_core::graph::Label;
use mu2x_core::{GatConfig, GatModel, Tensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_x(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Tensor {
    Tensor::from_vec(n, d, (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn random_lists(rng: &mut ChaCha8Rng, n: usize, p: f64) -> Vec<Vec<usize>> {
    let mut lists = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                lists[i].push(j);
                lists[j].push(i);
            }
        }
    }
    lists
}

/// Plain nested-loop GAT layer: for each node, softmax over its neighbors
/// (self included) of LeakyReLU(a_tᵀ W x_i + a_nᵀ W x_j).
fn dense_layer(head: &AttentionHead, x: &[Vec<f64>], nbrs: &[Vec<usize>], slope: f64) -> Vec<Vec<f64>> {
    let (din, dout) = (head.w.rows(), head.w.cols());
    let z: Vec<Vec<f64>> = x
        .iter()
        .map(|row| (0..dout).map(|c| (0..din).map(|k| row[k] * head.w.get(k, c)).sum()).collect())
        .collect();
    let dot = |v: &[f64], a: &Tensor| -> f64 { (0..v.len()).map(|c| v[c] * a.get(c, 0)).sum() };
    (0..x.len())
        .map(|i| {
            let e: Vec<f64> = nbrs[i]
                .iter()
                .map(|&j| {
                    let s = dot(&z[i], &head.att_target) + dot(&z[j], &head.att_neighbor);
                    if s > 0.0 {
                        s
                    } else {
                        slope * s
                    }
                })
                .collect();
            let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = e.iter().map(|v| (v - m).exp()).collect();
            let total: f64 = w.iter().sum();
            let mut out = vec![0.0; dout];
            for (k, &j) in nbrs[i].iter().enumerate() {
                for c in 0..dout {
                    out[c] += w[k] / total * z[j][c];
                }
            }
            out
        })
        .collect()
}

fn dense_forward(m: &GatModel, x: &Tensor, lists: &[Vec<usize>]) -> Vec<[f64; 2]> {
    let n = x.rows();
    let nbrs: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut v = lists[i].clone();
            v.push(i);
            v.sort();
            v.dedup();
            v
        })
        .collect();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).to_vec()).collect();
    let slope = m.config.leaky_slope;
    let heads: Vec<Vec<Vec<f64>>> = m.layer1.iter().map(|h| dense_layer(h, &rows, &nbrs, slope)).collect();
    let hidden: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            (0..m.config.hidden_dim)
                .map(|c| {
                    let v = heads.iter().map(|h| h[i][c]).sum::<f64>() / heads.len() as f64;
                    if v > 0.0 {
                        v
                    } else {
                        v.exp_m1()
                    }
                })
                .collect()
        })
        .collect();
    dense_layer(&m.layer2, &hidden, &nbrs, slope)
        .into_iter()
        .map(|l| {
            let mx = l[0].max(l[1]);
            let (a, b) = ((l[0] - mx).exp(), (l[1] - mx).exp());
            [a / (a + b), b / (a + b)]
        })
        .collect()
}

#[test]
fn ten_node_forward_matches_dense_oracle() {
    for (seed, heads) in [(3u64, 1usize), (4, 3)] {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let lists = random_lists(rng, 10, 0.3);
        let x = random_x(rng, 10, 6);
        let cfg = GatConfig {
            heads,
            hidden_dim: 5,
            seed,
            ..GatConfig::default()
        };
        let m = GatModel::init(6, &cfg).unwrap();
        let out = m.forward(&GatGraph::from_lists(&lists, true), &x).unwrap();
        let oracle = dense_forward(&m, &x, &lists);
        for (i, want) in oracle.iter().enumerate() {
            for c in 0..2 {
                assert!((out.probs.get(i, c) - want[c]).abs() < 1e-9, "node {i}");
            }
        }
    }
}

#[test]
fn star_graph_attention_matches_formula() {
    let rng = &mut ChaCha8Rng::seed_from_u64(21);
    let lists = vec![vec![1, 2, 3, 4], vec![0], vec![0], vec![0], vec![0]];
    let x = random_x(rng, 5, 4);
    let m = GatModel::init(4, &GatConfig { seed: 21, ..GatConfig::default() }).unwrap();
    let g = GatGraph::from_lists(&lists, true);
    let out = m.forward(&g, &x).unwrap();
    let head = &m.layer1[0];
    let project = |i: usize| -> Vec<f64> {
        (0..head.w.cols())
            .map(|c| (0..4).map(|k| x.get(i, k) * head.w.get(k, c)).sum())
            .collect()
    };
    let score = |i: usize, j: usize| -> f64 {
        let (zi, zj) = (project(i), project(j));
        let s: f64 = (0..zi.len())
            .map(|c| zi[c] * head.att_target.get(c, 0) + zj[c] * head.att_neighbor.get(c, 0))
            .sum();
        if s > 0.0 {
            s
        } else {
            0.2 * s
        }
    };
    let exps: Vec<f64> = (0..5).map(|j| score(0, j).exp()).collect();
    let total: f64 = exps.iter().sum();
    let from_tape = &out.attention1[0][g.edge_range(0)];
    let direct = attention_coefficients(head, &x, 0, g.neighbors(0), 0.2).unwrap();
    for j in 0..5 {
        assert!((from_tape[j] - exps[j] / total).abs() < 1e-12);
        assert!((direct[j] - exps[j] / total).abs() < 1e-12);
    }
}

#[test]
fn single_node_is_a_dense_network() {
    let rng = &mut ChaCha8Rng::seed_from_u64(8);
    let x = random_x(rng, 1, 3);
    let m = GatModel::init(3, &GatConfig::default()).unwrap();
    let out = m.forward(&GatGraph::from_lists(&[vec![]], true), &x).unwrap();
    let h: Vec<f64> = (0..16)
        .map(|c| {
            let v: f64 = (0..3).map(|k| x.get(0, k) * m.layer1[0].w.get(k, c)).sum();
            if v > 0.0 {
                v
            } else {
                v.exp_m1()
            }
        })
        .collect();
    let logits: Vec<f64> = (0..2).map(|c| (0..16).map(|k| h[k] * m.layer2.w.get(k, c)).sum()).collect();
    let p0 = 1.0 / (1.0 + (logits[1] - logits[0]).exp());
    assert!((out.probs.get(0, 0) - p0).abs() < 1e-12);
}

/// Labels are fully determined by column 0 (1 → fact, 0 → misinformation).
fn planted(n: usize, seed: u64) -> (GatGraph, Tensor, Vec<Option<Label>>) {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    let mut x = random_x(rng, n, 4);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let fact = i % 2 == 0;
        x.set(i, 0, if fact { 1.0 } else { 0.0 });
        labels.push(Some(if fact { Label::Fact } else { Label::Misinformation }));
    }
    (GatGraph::from_lists(&vec![Vec::new(); n], true), x, labels)
}

#[test]
fn planted_column_is_learned() {
    let (g, x, labels) = planted(200, 5);
    let rows: Vec<usize> = (0..200).collect();
    let (m, report) = gat::train(&g, &x, &labels, &rows, &GatConfig::default()).unwrap();
    assert_eq!(report.loss_history.len(), 400);
    assert!(report.loss_history.iter().all(|l| l.is_finite()));
    assert!(report.loss_history.last().unwrap() <= &report.loss_history[0]);
    let preds: Vec<Label> = m.predict(&g, &x).unwrap().iter().map(|p| p.label).collect();
    let golds: Vec<Label> = labels.iter().map(|l| l.unwrap()).collect();
    assert!(mu2x_core::eval::f1_score(&preds, &golds) >= 0.99);

    // zeroing the planted column flips a fact node to misinformation
    let target = 0;
    assert_eq!(m.predict_with_mask(&g, &x, &[], target).unwrap().label, Label::Fact);
    assert_eq!(m.predict_with_mask(&g, &x, &[0], target).unwrap().label, Label::Misinformation);
}

#[test]
fn mask_consistency() {
    let rng = &mut ChaCha8Rng::seed_from_u64(2);
    let lists = random_lists(rng, 12, 0.25);
    let g = GatGraph::from_lists(&lists, true);
    let x = random_x(rng, 12, 5);
    let mut m = GatModel::init(5, &GatConfig::default()).unwrap();
    assert!(m.predict_with_mask(&g, &x, &[], 0).is_err());
    m.freeze();
    let full = m.predict(&g, &x).unwrap();
    for t in 0..12 {
        let p = m.predict_with_mask(&g, &x, &[], t).unwrap();
        for c in 0..2 {
            assert!((p.probs[c] - full[t].probs[c]).abs() < 1e-12);
        }
        let mut zeroed = x.clone();
        zeroed.row_mut(t).iter_mut().for_each(|v| *v = 0.0);
        let want = m.predict(&g, &zeroed).unwrap()[t];
        let got = m.predict_with_mask(&g, &x, &[0, 1, 2, 3, 4], t).unwrap();
        assert!((got.probs[0] - want.probs[0]).abs() < 1e-12);
    }
    assert!(m.predict_with_mask(&g, &x, &[5], 0).is_err());
    assert!(m.predict_with_mask(&g, &x, &[], 12).is_err());
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let (g, x, labels) = planted(20, 1);
    let rows: Vec<usize> = (0..20).collect();
    let cfg = GatConfig {
        lr: 0.0,
        epochs: 5,
        ..GatConfig::default()
    };
    let (m, _) = gat::train(&g, &x, &labels, &rows, &cfg).unwrap();
    let mut fresh = GatModel::init(4, &cfg).unwrap();
    fresh.freeze();
    assert_eq!(m, fresh);
}

#[test]
fn single_class_training_set_is_rejected() {
    let (g, x, _) = planted(6, 1);
    let labels = vec![Some(Label::Fact); 6];
    let rows: Vec<usize> = (0..6).collect();
    assert!(matches!(
        gat::train(&g, &x, &labels, &rows, &GatConfig::default()),
        Err(gat::GatError::SingleClassTrainingSet)
    ));
}

fn assert_attention_normalized(g: &GatGraph, alpha: &[f64]) {
    for i in 0..g.len() {
        let s: f64 = alpha[g.edge_range(i)].iter().sum();
        assert!((s - 1.0).abs() < 1e-6);
    }
}

#[test]
fn attention_rows_sum_to_one_after_training() {
    let rng = &mut ChaCha8Rng::seed_from_u64(4);
    let lists = random_lists(rng, 40, 0.1);
    let g = GatGraph::from_lists(&lists, true);
    let x = random_x(rng, 40, 3);
    let labels: Vec<Option<Label>> = (0..40)
        .map(|i| Some(if x.get(i, 1) > 0.0 { Label::Fact } else { Label::Misinformation }))
        .collect();
    let rows: Vec<usize> = (0..40).collect();
    let cfg = GatConfig {
        heads: 2,
        epochs: 50,
        ..GatConfig::default()
    };
    let (m, _) = gat::train(&g, &x, &labels, &rows, &cfg).unwrap();
    let out = m.forward(&g, &x).unwrap();
    for a in &out.attention1 {
        assert_attention_normalized(&g, a);
    }
    assert_attention_normalized(&g, &out.attention2);
}

#[test]
fn stratified_split_proportions() {
    let labels: Vec<Option<Label>> = (0..1000)
        .map(|i| match i % 5 {
            0 => None,
            1 | 2 => Some(Label::Fact),
            _ => Some(Label::Misinformation),
        })
        .collect();
    let s = gat::Split::stratified(&labels, 3);
    assert_eq!(s.train.len() + s.val.len() + s.test.len(), 800);
    assert_eq!(s.train.len(), 560);
    assert_eq!(s.val.len(), 80);
    let fact_test = s.test.iter().filter(|&&r| labels[r] == Some(Label::Fact)).count();
    assert_eq!(fact_test, 80);
    assert_eq!(s, gat::Split::stratified(&labels, 3));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn forward_is_permutation_equivariant(seed in any::<u64>(), n in 2usize..12) {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let lists = random_lists(rng, n, 0.3);
        let x = random_x(rng, n, 4);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        // node i of the original becomes node perm[i]
        let mut plists = vec![Vec::new(); n];
        let mut px = Tensor::zeros(n, 4);
        for i in 0..n {
            plists[perm[i]] = lists[i].iter().map(|&j| perm[j]).collect();
            px.row_mut(perm[i]).copy_from_slice(x.row(i));
        }
        let m = GatModel::init(4, &GatConfig { seed, heads: 2, ..GatConfig::default() }).unwrap();
        let a = m.predict(&GatGraph::from_lists(&lists, true), &x).unwrap();
        let b = m.predict(&GatGraph::from_lists(&plists, true), &px).unwrap();
        for i in 0..n {
            prop_assert!((a[i].probs[0] - b[perm[i]].probs[0]).abs() < 1e-12);
            prop_assert!((a[i].probs[0] + a[i].probs[1] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn training_is_bit_reproducible(seed in any::<u64>()) {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let lists = random_lists(rng, 16, 0.2);
        let g = GatGraph::from_lists(&lists, true);
        let x = random_x(rng, 16, 3);
        let labels: Vec<Option<Label>> = (0..16).map(|i| Some(if i % 3 == 0 { Label::Fact } else { Label::Misinformation })).collect();
        let rows: Vec<usize> = (0..16).collect();
        let cfg = GatConfig { seed, epochs: 15, ..GatConfig::default() };
        let (m1, r1) = gat::train(&g, &x, &labels, &rows, &cfg).unwrap();
        let (m2, r2) = gat::train(&g, &x, &labels, &rows, &cfg).unwrap();
        prop_assert_eq!(r1.loss_history, r2.loss_history);
        prop_assert_eq!(m1, m2);
    }
}
