//! Small dense solvers for local surrogate fitting.

use alloc::vec;
use alloc::vec::Vec;

use crate::math;

/// In-place Cholesky factorization of a symmetric positive definite
/// `n × n` matrix (row-major); the lower triangle receives `L`.
/// Returns `false` if a pivot is not positive.
pub fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return false;
        }
        let d = math::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Linear model `y ≈ intercept + weights · x`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Ridge regression with an unpenalized intercept:
/// `min ‖y − b − X w‖² + λ‖w‖²` over `rows` samples of dimension `d`.
///
/// Works in the dual (`n × n`) when there are fewer samples than features.
/// Returns `None` only if `rows` is empty or `lambda ≤ 0` leaves the system
/// singular.
pub fn ridge(rows: &[Vec<f64>], y: &[f64], lambda: f64) -> Option<LinearModel> {
    let n = rows.len();
    if n == 0 || y.len() != n {
        return None;
    }
    let d = rows[0].len();
    let mut mean_x = vec![0.0; d];
    for r in rows {
        for (m, v) in mean_x.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean_x.iter_mut().for_each(|m| *m /= n as f64);
    let mean_y = y.iter().sum::<f64>() / n as f64;
    let xc: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean_x).map(|(v, m)| v - m).collect())
        .collect();
    let yc: Vec<f64> = y.iter().map(|v| v - mean_y).collect();

    let weights = if n < d {
        // w = Xᵀ (X Xᵀ + λI)⁻¹ y
        let mut g = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = xc[i].iter().zip(&xc[j]).map(|(a, b)| a * b).sum();
                g[i * n + j] = v;
                g[j * n + i] = v;
            }
            g[i * n + i] += lambda;
        }
        if !cholesky(&mut g, n) {
            return None;
        }
        let mut alpha = yc;
        cholesky_solve(&g, n, &mut alpha);
        let mut w = vec![0.0; d];
        for (a, r) in alpha.iter().zip(&xc) {
            for (wk, v) in w.iter_mut().zip(r) {
                *wk += a * v;
            }
        }
        w
    } else {
        let mut g = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        for (r, yi) in xc.iter().zip(&yc) {
            for i in 0..d {
                rhs[i] += r[i] * yi;
                for j in 0..=i {
                    g[i * d + j] += r[i] * r[j];
                }
            }
        }
        for i in 0..d {
            for j in 0..i {
                g[j * d + i] = g[i * d + j];
            }
            g[i * d + i] += lambda;
        }
        if !cholesky(&mut g, d) {
            return None;
        }
        cholesky_solve(&g, d, &mut rhs);
        rhs
    };
    let intercept = mean_y - weights.iter().zip(&mean_x).map(|(w, m)| w * m).sum::<f64>();
    Some(LinearModel { weights, intercept })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let mut a = vec![4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let orig = a.clone();
        assert!(cholesky(&mut a, 3));
        let mut b = vec![1.0, -2.0, 0.5];
        let rhs = b.clone();
        cholesky_solve(&a, 3, &mut b);
        for i in 0..3 {
            let s: f64 = (0..3).map(|j| orig[i * 3 + j] * b[j]).sum();
            assert!((s - rhs[i]).abs() < 1e-12);
        }
        assert!(!cholesky(&mut [0.0, 0.0, 0.0, 1.0], 2));
    }

    #[test]
    fn ridge_recovers_linear_function() {
        let rows: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![libm::sin(t), libm::cos(1.3 * t), 0.1 * t]
            })
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 0.5 + 2.0 * r[0] - r[1] + 0.3 * r[2]).collect();
        let m = ridge(&rows, &y, 1e-10).unwrap();
        assert!((m.intercept - 0.5).abs() < 1e-6);
        assert!((m.weights[0] - 2.0).abs() < 1e-6);
        assert!((m.weights[1] + 1.0).abs() < 1e-6);
    }

    #[test]
    fn dual_solution_satisfies_normal_equations() {
        // 4 samples in 6 dims goes through the dual; the result must still
        // satisfy the primal normal equations.
        let rows: Vec<Vec<f64>> = (0..4)
            .map(|i| (0..6).map(|k| libm::sin((i * 7 + k) as f64)).collect())
            .collect();
        let y = [0.3, -0.1, 0.8, 0.2];
        let dual = ridge(&rows, &y, 0.5).unwrap();
        let mean_x: Vec<f64> = (0..6).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / 4.0).collect();
        let mean_y = y.iter().sum::<f64>() / 4.0;
        // (XcᵀXc + λI) w = Xcᵀ yc
        for k in 0..6 {
            let mut lhs = 0.5 * dual.weights[k];
            let mut rhs = 0.0;
            for (r, yi) in rows.iter().zip(&y) {
                let fit: f64 = (0..6).map(|j| (r[j] - mean_x[j]) * dual.weights[j]).sum();
                lhs += (r[k] - mean_x[k]) * fit;
                rhs += (r[k] - mean_x[k]) * (yi - mean_y);
            }
            assert!((lhs - rhs).abs() < 1e-10);
        }
    }
}
