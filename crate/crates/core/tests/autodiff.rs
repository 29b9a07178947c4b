//! Central finite-difference checks for every tape op.

use std::time::Instant;

use mu2x_core::{Tape, Tensor, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-4;
const TOL: f64 = 1e-4;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Tensor {
    Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(lo..hi)).collect())
}

/// Entries bounded away from zero so kinked ops are differentiable at the
/// evaluation point and one `EPS` step never crosses the kink.
fn off_zero(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let m = rng.random_range(0.05..2.0);
            if rng.random_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    Tensor::from_vec(rows, cols, data)
}

/// `loss = Σ (f(inputs) ⊙ w)` for a fixed random weight `w`.
type Build = dyn Fn(&mut Tape<'_>, &[Var]) -> Var;

fn loss_value(inputs: &[Tensor], weight: &Tensor, build: &Build) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let w = tape.constant(weight.clone());
    let prod = tape.mul(out, w).unwrap();
    let l = tape.reduce_sum(prod);
    tape.value(l).item()
}

fn check(name: &str, inputs: Vec<Tensor>, rng: &mut ChaCha8Rng, build: &Build) {
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.leaf(t.clone())).collect();
    let out = build(&mut tape, &vars);
    let (r, c) = tape.value(out).shape();
    let weight = random(rng, r, c, -1.0, 1.0);
    let w = tape.constant(weight.clone());
    let prod = tape.mul(out, w).unwrap();
    let l = tape.reduce_sum(prod);
    let grads = tape.backward(l).unwrap();
    for (i, v) in vars.iter().enumerate() {
        let analytic = grads.get(*v).cloned().unwrap_or_else(|| Tensor::zeros(inputs[i].rows(), inputs[i].cols()));
        for k in 0..inputs[i].len() {
            let mut plus = inputs.clone();
            plus[i].as_mut_slice()[k] += EPS;
            let mut minus = inputs.clone();
            minus[i].as_mut_slice()[k] -= EPS;
            let numeric = (loss_value(&plus, &weight, build) - loss_value(&minus, &weight, build)) / (2.0 * EPS);
            let a = analytic.as_slice()[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            assert!(rel <= TOL, "{name}: input {i} entry {k}: analytic {a} numeric {numeric} rel {rel}");
        }
    }
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(1..5), rng.random_range(1..5))
}

fn run_case(seed: u64) {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    let (r, c) = dims(rng);
    let k = rng.random_range(1..5);

    let a = random(rng, r, k, -1.0, 1.0);
    let b = random(rng, k, c, -1.0, 1.0);
    check("matmul", vec![a, b], rng, &|t, v| t.matmul(v[0], v[1]).unwrap());

    let (a, b, row) = (random(rng, r, c, -1.0, 1.0), random(rng, r, c, -1.0, 1.0), random(rng, 1, c, -1.0, 1.0));
    check("add", vec![a.clone(), b.clone()], rng, &|t, v| t.add(v[0], v[1]).unwrap());
    check("add_broadcast", vec![a.clone(), row.clone()], rng, &|t, v| t.add(v[0], v[1]).unwrap());
    check("mul", vec![a.clone(), b], rng, &|t, v| t.mul(v[0], v[1]).unwrap());
    check("mul_broadcast", vec![a.clone(), row], rng, &|t, v| t.mul(v[0], v[1]).unwrap());

    let s = random(rng, r, 1, -1.0, 1.0);
    check("scale_rows", vec![a.clone(), s], rng, &|t, v| t.scale_rows(v[0], v[1]).unwrap());
    let factor = rng.random_range(-2.0..2.0);
    check("scalar_mul", vec![a.clone()], rng, &move |t, v| t.scalar_mul(v[0], factor));

    let kinked = off_zero(rng, r, c);
    let slope = rng.random_range(0.01..0.5);
    check("leaky_relu", vec![kinked.clone()], rng, &move |t, v| t.leaky_relu(v[0], slope));
    check("elu", vec![kinked], rng, &|t, v| t.elu(v[0]));
    check("exp", vec![a.clone()], rng, &|t, v| t.exp(v[0]));
    check("log", vec![random(rng, r, c, 0.2, 3.0)], rng, &|t, v| t.log(v[0]).unwrap());

    let logits = random(rng, r, c, -2.0, 2.0);
    check("row_softmax", vec![logits.clone()], rng, &|t, v| t.row_softmax(v[0]));
    check("log_row_softmax", vec![logits.clone()], rng, &|t, v| t.log_row_softmax(v[0]));
    let mut mask: Vec<bool> = (0..r * c).map(|_| rng.random_bool(0.6)).collect();
    for row in 0..r {
        mask[row * c] = true;
    }
    check("masked_row_softmax", vec![logits], rng, &move |t, v| {
        t.masked_row_softmax(v[0], &mask).unwrap()
    });
    check("reduce_sum", vec![a.clone()], rng, &|t, v| t.reduce_sum(v[0]));

    let n_idx = rng.random_range(1..7);
    let idx: Vec<usize> = (0..n_idx).map(|_| rng.random_range(0..r)).collect();
    let gidx = idx.clone();
    check("gather_rows", vec![a.clone()], rng, &move |t, v| t.gather_rows(v[0], &gidx).unwrap());
    let src = random(rng, n_idx, c, -1.0, 1.0);
    check("scatter_add_rows", vec![src.clone()], rng, &move |t, v| {
        t.scatter_add_rows(v[0], &idx, r).unwrap()
    });

    // segment boundaries over n_idx rows
    let mut offsets = vec![0];
    let mut at = 0;
    while at < n_idx {
        at = (at + rng.random_range(1..4)).min(n_idx);
        offsets.push(at);
    }
    check("segment_softmax", vec![src], rng, &move |t, v| t.segment_softmax(v[0], &offsets).unwrap());

    let top_rows = rng.random_range(1..4);
    let top = random(rng, top_rows, c, -1.0, 1.0);
    check("concat_rows", vec![a.clone(), top], rng, &|t, v| t.concat_rows(&[v[0], v[1]]).unwrap());
    let side_cols = rng.random_range(1..4);
    let side = random(rng, r, side_cols, -1.0, 1.0);
    check("concat_cols", vec![a, side], rng, &|t, v| t.concat_cols(&[v[0], v[1]]).unwrap());
}

#[test]
fn finite_differences_over_100_random_cases() {
    let start = Instant::now();
    for seed in 0..100 {
        run_case(seed);
    }
    assert!(start.elapsed().as_secs_f64() < 10.0, "took {:?}", start.elapsed());
}

#[test]
fn composite_gat_style_chain() {
    // attention-style composition of gather, segment softmax, scale and scatter
    let rng = &mut ChaCha8Rng::seed_from_u64(11);
    let x = random(rng, 4, 3, -1.0, 1.0);
    let w = random(rng, 3, 2, -1.0, 1.0);
    let a = random(rng, 2, 1, -1.0, 1.0);
    let dst = [0usize, 0, 1, 2, 2, 2, 3];
    let src = [0usize, 1, 1, 2, 0, 3, 3];
    let offsets = [0usize, 2, 3, 6, 7];
    check("chain", vec![x, w, a], rng, &move |t, v| {
        let z = t.matmul(v[0], v[1]).unwrap();
        let s = t.matmul(z, v[2]).unwrap();
        let et = t.gather_rows(s, &dst).unwrap();
        let en = t.gather_rows(s, &src).unwrap();
        let e = t.add(et, en).unwrap();
        let e = t.scalar_mul(e, 1.0 + 1e-3);
        let e = t.exp(e);
        let e = t.log(e).unwrap();
        let alpha = t.segment_softmax(e, &offsets).unwrap();
        let zs = t.gather_rows(z, &src).unwrap();
        let msg = t.scale_rows(zs, alpha).unwrap();
        let h = t.scatter_add_rows(msg, &dst, 4).unwrap();
        t.elu(h)
    });
}

#[test]
fn softmax_examples() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_vec(2, 2, vec![0.0, 0.0, 2f64.ln(), 0.0]));
    let s = tape.row_softmax(a);
    let v = tape.value(s);
    assert_eq!(v.row(0), &[0.5, 0.5]);
    assert!((v.get(1, 0) - 2.0 / 3.0).abs() < 1e-15);
    assert!((v.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn masked_softmax_zeroes_outside_mask() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_vec(1, 3, vec![5.0, 0.0, 0.0]));
    let s = tape.masked_row_softmax(a, &[false, true, true]).unwrap();
    assert_eq!(tape.value(s).row(0), &[0.0, 0.5, 0.5]);
    assert!(tape.masked_row_softmax(a, &[false, false, false]).is_err());
}

proptest! {
    #[test]
    fn row_softmax_rows_sum_to_one(rows in 1usize..6, cols in 1usize..8, seed in any::<u64>(), scale in 0.1f64..50.0) {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let mut tape = Tape::new();
        let a = tape.constant(random(rng, rows, cols, -scale, scale));
        let s = tape.row_softmax(a);
        for r in 0..rows {
            let row = tape.value(s).row(r);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }
}

#[test]
fn masked_softmax_renormalizes_over_mask() {
    let mut tape = Tape::new();
    let a = tape.constant(Tensor::from_vec(1, 3, vec![5.0, 9.0, 1.0]));
    let s = tape.masked_row_softmax(a, &[true, false, true]).unwrap();
    let z = 5f64.exp() + 1f64.exp();
    let got = tape.value(s).row(0);
    assert!((got[0] - 5f64.exp() / z).abs() < 1e-15);
    assert_eq!(got[1], 0.0);
    assert!((got[2] - 1f64.exp() / z).abs() < 1e-15);
}

#[test]
fn linear_loss_gradient_is_the_input() {
    let x = Tensor::from_vec(3, 1, vec![1.0, -2.0, 0.5]);
    let mut tape = Tape::new();
    let w = tape.leaf(Tensor::from_vec(2, 3, vec![0.3; 6]));
    let xv = tape.leaf(x.clone());
    let y = tape.matmul(w, xv).unwrap();
    let l = tape.reduce_sum(y);
    let g = tape.backward(l).unwrap();
    for r in 0..2 {
        assert_eq!(g.get(w).unwrap().row(r), x.as_slice());
    }
    assert_eq!(g.get(xv).unwrap().as_slice(), &[0.6, 0.6, 0.6]);
}

#[test]
fn cross_entropy_with_equal_logits() {
    let mut tape = Tape::new();
    let logits = tape.leaf(Tensor::from_vec(1, 2, vec![0.7, 0.7]));
    let logp = tape.log_row_softmax(logits);
    let onehot = tape.constant(Tensor::from_vec(1, 2, vec![1.0, 0.0]));
    let picked = tape.mul(logp, onehot).unwrap();
    let s = tape.reduce_sum(picked);
    let loss = tape.scalar_mul(s, -1.0);
    let g = tape.grad_wrt_input(loss, logits).unwrap();
    assert!((g.get(0, 0) + 0.5).abs() < 1e-15);
    assert!((g.get(0, 1) - 0.5).abs() < 1e-15);
}

#[test]
fn backward_is_linear_in_the_loss() {
    let rng = &mut ChaCha8Rng::seed_from_u64(5);
    let x = random(rng, 3, 4, -1.0, 1.0);
    let grad_of = |which: u8| {
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        let e = tape.exp(v);
        let l1 = tape.reduce_sum(e);
        let s = tape.row_softmax(v);
        let sq = tape.mul(s, s).unwrap();
        let l2 = tape.reduce_sum(sq);
        let loss = match which {
            1 => l1,
            2 => l2,
            _ => tape.add(l1, l2).unwrap(),
        };
        tape.grad_wrt_input(loss, v).unwrap()
    };
    let (g1, g2, g12) = (grad_of(1), grad_of(2), grad_of(3));
    for k in 0..12 {
        assert!((g1.as_slice()[k] + g2.as_slice()[k] - g12.as_slice()[k]).abs() < 1e-12);
    }
}

#[test]
fn tape_misuse_is_reported() {
    use mu2x_core::tensor::TensorError;
    let mut tape = Tape::new();
    let a = tape.leaf(Tensor::from_vec(1, 2, vec![1.0, 2.0]));
    assert_eq!(tape.backward(a).unwrap_err(), TensorError::NotScalarLoss((1, 2)));
    let l = tape.reduce_sum(a);
    assert!(tape.backward(l).is_ok());
    assert_eq!(tape.backward(l).unwrap_err(), TensorError::TapeReused);
    let mut fresh = Tape::new();
    let x = fresh.leaf(Tensor::scalar(1.0));
    let k = fresh.constant(Tensor::scalar(2.0));
    let y = fresh.add(x, k).unwrap();
    assert_eq!(fresh.grad_wrt_input(y, k).unwrap_err(), TensorError::InputNotOnTape);
}
