//! Shared fixtures for integration tests.
#![allow(dead_code)]

use koopman_safe::qp::{QpProblem, QpRow};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Feasible by construction: every row holds at a hidden point `p`, several with equality.
pub fn random_feasible(rng: &mut ChaCha8Rng) -> QpProblem {
    let p: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let n_rows = rng.gen_range(0..=4);
    let rows = (0..n_rows)
        .map(|_| {
            let a: Vec<f64> = (0..2).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let gap = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.0..2.0) };
            let b = a[0] * p[0] + a[1] * p[1] - gap;
            QpRow { a, b }
        })
        .collect();
    let u0 = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
    QpProblem::new(u0, rows).unwrap()
}

/// Enumerates every active subset, solves its equality-constrained projection,
/// and returns the unique KKT point.
pub fn brute_force(p: &QpProblem) -> Vec<f64> {
    let m = p.rows.len();
    let u0 = DVector::from_column_slice(&p.u0);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let idx: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let u = if idx.is_empty() {
            u0.clone()
        } else {
            let a = DMatrix::from_fn(idx.len(), 2, |i, j| p.rows[idx[i]].a[j]);
            let gram = &a * a.transpose();
            if gram.determinant().abs() < 1e-12 {
                continue;
            }
            let b = DVector::from_fn(idx.len(), |i, _| p.rows[idx[i]].b);
            let mu = gram.lu().solve(&(b - &a * &u0)).unwrap();
            if mu.iter().any(|v| *v < -1e-10) {
                continue;
            }
            &u0 + a.transpose() * mu
        };
        let feasible = p.rows.iter().all(|r| r.a[0] * u[0] + r.a[1] * u[1] >= r.b - 1e-9);
        if feasible {
            let obj = p.objective(u.as_slice());
            if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                best = Some((obj, u.as_slice().to_vec()));
            }
        }
    }
    best.expect("feasible instance has a KKT point").1
}
