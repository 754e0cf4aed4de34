//! Dense active-set solver for `min 0.5 |u - u0|^2  s.t.  a_i . u >= b_i`.
//!
//! The method starts at the unconstrained minimizer `u0` and repeatedly adds
//! the most violated row, moving along the projection onto the active affine
//! subspace and dropping rows whose multipliers would turn negative (the
//! dual active-set scheme of Goldfarb and Idnani specialized to an identity
//! Hessian). Active rows stay linearly independent, so each subproblem is a
//! small Gram solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 100;
pub const DEFAULT_SLACK_WEIGHT: f64 = 1e3;
/// Rows whose projected normal is shorter than this are treated as dependent.
pub const RANK_TOLERANCE: f64 = 1e-10;
const FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct QpRow {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub u0: Vec<f64>,
    pub rows: Vec<QpRow>,
}

impl QpProblem {
    pub fn new(u0: Vec<f64>, rows: Vec<QpRow>) -> Result<Self> {
        let p = Self { u0, rows };
        p.validate()?;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.u0.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.u0.len();
        if m == 0 {
            return Err(Error::Config("QP needs at least one decision variable".into()));
        }
        if self.u0.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("QP nominal input is not finite".into()));
        }
        for r in &self.rows {
            if r.a.len() != m {
                return Err(Error::dim("QpProblem row", m, r.a.len()));
            }
            if !r.b.is_finite() || r.a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("QP row has non-finite entries".into()));
            }
        }
        Ok(())
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        0.5 * u.iter().zip(&self.u0).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub u_star: Vec<f64>,
    pub active_set: Vec<usize>,
    /// One multiplier per row, zero for inactive rows.
    pub multipliers: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: QpStatus,
    /// Nonnegative row weights `y` with `sum y_i a_i = 0` and `sum y_i b_i > 0`.
    pub certificate: Option<Vec<f64>>,
    /// Per-row slack used (all zero unless solved through the slack fallback).
    pub slack: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Primal direction `z = (I - N^T (N N^T)^-1 N) n` and dual direction
/// `r = (N N^T)^-1 N n` for active normals `N`.
fn directions(rows: &[QpRow], active: &[usize], n: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let m = n.len();
    if active.is_empty() {
        return (n.to_vec(), Vec::new());
    }
    let k = active.len();
    let nmat = DMatrix::from_fn(k, m, |i, j| rows[active[i]].a[j]);
    let gram = &nmat * nmat.transpose();
    let rhs = &nmat * DVector::from_column_slice(n);
    let r = match gram.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => gram
            .pseudo_inverse(RANK_TOLERANCE)
            .map(|p| p * &rhs)
            .unwrap_or_else(|_| DVector::zeros(k)),
    };
    let proj = nmat.transpose() * &r;
    let z: Vec<f64> = (0..m).map(|j| n[j] - proj[j]).collect();
    (z, r.iter().copied().collect())
}

/// Stationarity, complementarity, and feasibility residuals, summed.
pub fn kkt_residual(p: &QpProblem, u: &[f64], multipliers: &[f64]) -> f64 {
    let m = p.dim();
    let mut grad: Vec<f64> = (0..m).map(|j| u[j] - p.u0[j]).collect();
    let mut comp = 0.0;
    let mut feas = 0.0;
    let mut dual = 0.0;
    for (row, &mu) in p.rows.iter().zip(multipliers) {
        for (g, a) in grad.iter_mut().zip(&row.a) {
            *g -= mu * a;
        }
        let s = dot(&row.a, u) - row.b;
        comp += (mu * s).abs();
        feas += (-s).max(0.0);
        dual += (-mu).max(0.0);
    }
    grad.iter().map(|g| g * g).sum::<f64>().sqrt() + comp + feas + dual
}

pub fn solve(p: &QpProblem) -> Result<QpSolution> {
    solve_capped(p, DEFAULT_MAX_ITERATIONS)
}

pub fn solve_capped(p: &QpProblem, max_iterations: usize) -> Result<QpSolution> {
    p.validate()?;
    let rows = &p.rows;
    let mut u = p.u0.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut mu_active: Vec<f64> = Vec::new();
    let mut iterations = 0usize;

    loop {
        // most violated row, lowest index on ties
        let mut pick: Option<(usize, f64)> = None;
        for (i, row) in rows.iter().enumerate() {
            if active.contains(&i) {
                continue;
            }
            let s = dot(&row.a, &u) - row.b;
            if s < -FEAS_TOL * (1.0 + row.b.abs()) && pick.is_none_or(|(_, best)| s < best) {
                pick = Some((i, s));
            }
        }
        let Some((pidx, _)) = pick else { break };
        let mut mu_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iterations {
                return Err(Error::SolverFailure { cap: max_iterations });
            }
            let normal = &rows[pidx].a;
            let (z, r) = directions(rows, &active, normal);
            let zz = dot(&z, &z);
            let full_step = if zz.sqrt() > RANK_TOLERANCE * (1.0 + dot(normal, normal).sqrt()) {
                Some((rows[pidx].b - dot(normal, &u)) / zz)
            } else {
                None
            };
            let mut partial: Option<(usize, f64)> = None;
            for (j, &rj) in r.iter().enumerate() {
                if rj > RANK_TOLERANCE {
                    let t = mu_active[j] / rj;
                    if partial.is_none_or(|(_, best)| t < best) {
                        partial = Some((j, t));
                    }
                }
            }
            match (full_step, partial) {
                (None, None) => {
                    let mut y = vec![0.0; rows.len()];
                    y[pidx] = 1.0;
                    for (j, &i) in active.iter().enumerate() {
                        y[i] = (-r[j]).max(0.0);
                    }
                    let mut multipliers = vec![0.0; rows.len()];
                    for (j, &i) in active.iter().enumerate() {
                        multipliers[i] = mu_active[j];
                    }
                    return Ok(QpSolution {
                        kkt_residual: kkt_residual(p, &u, &multipliers),
                        u_star: u,
                        active_set: active,
                        multipliers,
                        iterations,
                        status: QpStatus::Infeasible,
                        certificate: Some(y),
                        slack: vec![0.0; rows.len()],
                    });
                }
                (full, part) => {
                    let t_full = full.unwrap_or(f64::INFINITY);
                    let (drop_j, t_part) = part.unwrap_or((usize::MAX, f64::INFINITY));
                    let t = t_full.min(t_part);
                    if full.is_some() {
                        for (uj, zj) in u.iter_mut().zip(&z) {
                            *uj += t * zj;
                        }
                    }
                    for (mj, rj) in mu_active.iter_mut().zip(&r) {
                        *mj -= t * rj;
                    }
                    mu_p += t;
                    if t_full <= t_part {
                        active.push(pidx);
                        mu_active.push(mu_p);
                        break;
                    }
                    active.remove(drop_j);
                    mu_active.remove(drop_j);
                }
            }
        }
    }

    let mut multipliers = vec![0.0; rows.len()];
    for (j, &i) in active.iter().enumerate() {
        multipliers[i] = mu_active[j].max(0.0);
    }
    let mut order: Vec<usize> = (0..active.len()).collect();
    order.sort_by_key(|&j| active[j]);
    let active_set: Vec<usize> = order.iter().map(|&j| active[j]).collect();
    Ok(QpSolution {
        kkt_residual: kkt_residual(p, &u, &multipliers),
        u_star: u,
        active_set,
        multipliers,
        iterations,
        status: QpStatus::Solved,
        certificate: None,
        slack: vec![0.0; rows.len()],
    })
}

/// Solves exactly when feasible; otherwise minimizes
/// `0.5 |u - u0|^2 + 0.5 W |s|^2` subject to `a_i . u + s_i >= b_i`.
pub fn solve_with_slack(p: &QpProblem, slack_weight: f64) -> Result<QpSolution> {
    solve_with_slack_capped(p, slack_weight, DEFAULT_MAX_ITERATIONS)
}

/// [`solve_with_slack`] with an explicit iteration cap for the exact phase;
/// the penalized phase gets one extra iteration per row.
pub fn solve_with_slack_capped(p: &QpProblem, slack_weight: f64, max_iterations: usize) -> Result<QpSolution> {
    let exact = solve_capped(p, max_iterations)?;
    if exact.status == QpStatus::Solved {
        return Ok(exact);
    }
    penalized(p, slack_weight, max_iterations)
}

/// Quadratic-penalty relaxation with one slack per row; always feasible.
pub fn solve_penalized(p: &QpProblem, slack_weight: f64) -> Result<QpSolution> {
    penalized(p, slack_weight, DEFAULT_MAX_ITERATIONS)
}

fn penalized(p: &QpProblem, slack_weight: f64, max_iterations: usize) -> Result<QpSolution> {
    if !(slack_weight > 0.0 && slack_weight.is_finite()) {
        return Err(Error::Config(format!("slack weight must be positive (got {slack_weight})")));
    }
    p.validate()?;
    let m = p.dim();
    let k = p.rows.len();
    // s = s_scaled / sqrt(W) keeps the Hessian the identity
    let scale = 1.0 / slack_weight.sqrt();
    let mut u0 = p.u0.clone();
    u0.extend(std::iter::repeat_n(0.0, k));
    let rows = p
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut a = r.a.clone();
            a.extend((0..k).map(|j| if j == i { scale } else { 0.0 }));
            QpRow { a, b: r.b }
        })
        .collect();
    let aug = QpProblem { u0, rows };
    let cap = max_iterations + k;
    let sol = solve_capped(&aug, cap)?;
    if sol.status != QpStatus::Solved {
        return Err(Error::SolverFailure { cap });
    }
    let u_star = sol.u_star[..m].to_vec();
    let slack: Vec<f64> = sol.u_star[m..].iter().map(|s| s * scale).collect();
    Ok(QpSolution {
        kkt_residual: sol.kkt_residual,
        u_star,
        active_set: sol.active_set,
        multipliers: sol.multipliers,
        iterations: sol.iterations,
        status: QpStatus::Solved,
        certificate: None,
        slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(a: &[f64], b: f64) -> QpRow {
        QpRow { a: a.to_vec(), b }
    }

    #[test]
    fn unconstrained_returns_nominal() {
        let p = QpProblem::new(vec![1.5, -2.0], vec![]).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.u_star, vec![1.5, -2.0]);
        assert!(s.active_set.is_empty());
        assert_eq!(s.status, QpStatus::Solved);
    }

    #[test]
    fn half_space_projection() {
        let p = QpProblem::new(vec![1.0, 0.0], vec![row(&[-1.0, 0.0], 0.0)]).unwrap();
        let s = solve(&p).unwrap();
        assert_relative_eq!(s.u_star[0], 0.0, epsilon = 1e-15);
        assert_relative_eq!(s.u_star[1], 0.0, epsilon = 1e-15);
        assert_eq!(s.active_set, vec![0]);
        assert!(s.kkt_residual <= 1e-12);
    }

    #[test]
    fn drops_row_when_multiplier_would_turn_negative() {
        // first row added is most violated, second makes it redundant
        let p = QpProblem::new(
            vec![0.0, 0.0],
            vec![row(&[1.0, 0.0], 1.0), row(&[1.0, 1.0], 3.0), row(&[0.0, 1.0], 2.5)],
        )
        .unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, QpStatus::Solved);
        assert!(s.kkt_residual <= 1e-10, "kkt {}", s.kkt_residual);
        assert_relative_eq!(s.u_star[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(s.u_star[1], 2.5, epsilon = 1e-12);
    }

    #[test]
    fn infeasible_with_certificate() {
        let p = QpProblem::new(vec![0.0, 0.0], vec![row(&[1.0, 0.0], 1.0), row(&[-1.0, 0.0], 1.0)]).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        let y = s.certificate.unwrap();
        assert!(y.iter().all(|&v| v >= 0.0));
        let combo: Vec<f64> = (0..2).map(|j| y.iter().zip(&p.rows).map(|(w, r)| w * r.a[j]).sum()).collect();
        assert!(combo.iter().all(|c| c.abs() < 1e-12));
        assert!(y.iter().zip(&p.rows).map(|(w, r)| w * r.b).sum::<f64>() > 0.0);
    }

    #[test]
    fn contradictory_rows_split_slack() {
        let u0 = 0.3;
        let w = 1e3;
        let p = QpProblem::new(vec![u0, 0.0], vec![row(&[1.0, 0.0], 1.0), row(&[-1.0, 0.0], 1.0)]).unwrap();
        let s = solve_with_slack(&p, w).unwrap();
        // stationarity of 0.5(u - u0)^2 + 0.5 W ((1 - u)^2 + (1 + u)^2)
        let u = u0 / (1.0 + 2.0 * w);
        assert_relative_eq!(s.u_star[0], u, epsilon = 1e-12);
        assert_relative_eq!(s.slack[0], 1.0 - u, epsilon = 1e-12);
        assert_relative_eq!(s.slack[1], 1.0 + u, epsilon = 1e-12);
    }

    #[test]
    fn feasible_problem_uses_no_slack() {
        let p = QpProblem::new(vec![1.0, 1.0], vec![row(&[1.0, 2.0], 5.0)]).unwrap();
        let exact = solve(&p).unwrap();
        let slack = solve_with_slack(&p, 1e3).unwrap();
        assert_eq!(exact.u_star, slack.u_star);
        assert!(slack.slack.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn penalty_converges_to_exact() {
        let p = QpProblem::new(vec![1.0, -1.0], vec![row(&[1.0, 2.0], 5.0), row(&[-1.0, 1.0], 0.5)]).unwrap();
        let exact = solve(&p).unwrap();
        let far = solve_penalized(&p, 1e3).unwrap();
        let near = solve_penalized(&p, 1e8).unwrap();
        let dist = |s: &QpSolution| {
            s.u_star
                .iter()
                .zip(&exact.u_star)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        };
        assert!(dist(&near) <= 1e-5);
        assert!(dist(&near) < dist(&far));
    }

    #[test]
    fn iteration_cap_enforced() {
        let p = QpProblem::new(vec![0.0, 0.0], vec![row(&[1.0, 0.0], 1.0), row(&[0.0, 1.0], 1.0)]).unwrap();
        assert!(matches!(solve_capped(&p, 1), Err(Error::SolverFailure { cap: 1 })));
    }

    #[test]
    fn invalid_problems_rejected() {
        assert!(QpProblem::new(vec![], vec![]).is_err());
        assert!(QpProblem::new(vec![0.0], vec![row(&[1.0, 0.0], 0.0)]).is_err());
        assert!(QpProblem::new(vec![f64::NAN], vec![]).is_err());
        assert!(solve_penalized(&QpProblem::new(vec![0.0], vec![]).unwrap(), 0.0).is_err());
    }

    #[test]
    fn parallel_duplicate_rows() {
        let p = QpProblem::new(vec![0.0, 0.0], vec![row(&[1.0, 1.0], 1.0), row(&[2.0, 2.0], 2.0)]).unwrap();
        let s = solve(&p).unwrap();
        assert_eq!(s.status, QpStatus::Solved);
        assert_relative_eq!(s.u_star[0], 0.5, epsilon = 1e-12);
        assert_relative_eq!(s.u_star[1], 0.5, epsilon = 1e-12);
        assert!(s.kkt_residual <= 1e-10);
    }
}
