//! Obstacle barrier functions and the affine safety constraints built from
//! them, one constraint form per regime.
//!
//! Each obstacle has `h(z) = (x - cx)^2 + (y - cy)^2 - R^2`, which has relative
//! degree two for the double integrator. Constraints are enforced on the
//! first-order surrogate `H = h' + k1 h`, whose input coefficient is nonzero
//! away from the obstacle center. Every constraint is emitted as `row . u >= rhs`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::RunLog;
use crate::plant::ControlAffine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleCbf {
    pub center: [f64; 2],
    pub radius: f64,
    pub k1: f64,
    pub alpha_gain: f64,
}

impl ObstacleCbf {
    pub fn new(center: [f64; 2], radius: f64, k1: f64, alpha_gain: f64) -> Result<Self> {
        let cbf = Self {
            center,
            radius,
            k1,
            alpha_gain,
        };
        cbf.validate()?;
        Ok(cbf)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.center.iter().all(|c| c.is_finite())) {
            return Err(Error::Config("obstacle center must be finite".into()));
        }
        for (name, v) in [("radius", self.radius), ("k1", self.k1), ("alpha_gain", self.alpha_gain)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("obstacle {name} must be positive (got {v})")));
            }
        }
        Ok(())
    }

    pub fn h(&self, z: &[f64]) -> f64 {
        let (dx, dy) = (z[0] - self.center[0], z[1] - self.center[1]);
        dx * dx + dy * dy - self.radius * self.radius
    }

    pub fn grad_h(&self, z: &[f64]) -> [f64; 4] {
        [2.0 * (z[0] - self.center[0]), 2.0 * (z[1] - self.center[1]), 0.0, 0.0]
    }

    fn alpha(&self, v: f64) -> f64 {
        self.alpha_gain * v
    }
}

/// Surrogate `H = 2(x - cx) vx + 2(y - cy) vy + k1 h` with its state gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surrogate {
    pub h: f64,
    pub value: f64,
    pub grad: [f64; 4],
}

pub fn hocbf_surrogate(cbf: &ObstacleCbf, z: &[f64]) -> Surrogate {
    let (dx, dy) = (z[0] - cbf.center[0], z[1] - cbf.center[1]);
    let (vx, vy) = (z[2], z[3]);
    let h = cbf.h(z);
    Surrogate {
        h,
        value: 2.0 * dx * vx + 2.0 * dy * vy + cbf.k1 * h,
        grad: [
            2.0 * vx + 2.0 * cbf.k1 * dx,
            2.0 * vy + 2.0 * cbf.k1 * dy,
            2.0 * dx,
            2.0 * dy,
        ],
    }
}

impl Surrogate {
    /// `L_f H = grad H . f(z)`, the known drift part of `H'`.
    pub fn lie_drift(&self, plant: &impl ControlAffine, z: &[f64]) -> f64 {
        dot(&self.grad, &plant.drift(z))
    }

    /// `L_g H = grad H^T g(z)`.
    pub fn lie_input(&self, plant: &impl ControlAffine, z: &[f64]) -> Vec<f64> {
        let g = plant.input_matrix(z);
        (0..g.ncols()).map(|j| (0..g.nrows()).map(|i| self.grad[i] * g[(i, j)]).sum()).collect()
    }

    pub fn grad_l1(&self) -> f64 {
        self.grad.iter().map(|g| g.abs()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Naive,
    Robust,
    RobustAdaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub obstacle: usize,
    pub kind: ConstraintKind,
}

/// `row . u >= rhs`, with `margin = h(z)` when built.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyConstraint {
    pub row: Vec<f64>,
    pub rhs: f64,
    pub provenance: Provenance,
    pub margin: f64,
    /// Surrogate value the class-K term acted on (`H`, or `h_r` when robust-adaptive).
    pub barrier: f64,
}

fn check_d_hat(d_hat: &DVector<f64>, n: usize) -> Result<()> {
    if d_hat.len() != n {
        return Err(Error::dim("safety constraint (d_hat)", n, d_hat.len()));
    }
    if d_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("disturbance estimate is not finite".into()));
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    cbf: &ObstacleCbf,
    obstacle: usize,
    z: &[f64],
    d_hat: &DVector<f64>,
    plant: &impl ControlAffine,
    kind: ConstraintKind,
    barrier_shift: f64,
    extra_rhs: f64,
) -> Result<(SafetyConstraint, Surrogate)> {
    check_d_hat(d_hat, plant.state_dim())?;
    let s = hocbf_surrogate(cbf, z);
    let barrier = s.value - barrier_shift;
    let rhs = -cbf.alpha(barrier) - s.lie_drift(plant, z) - dot(&s.grad, d_hat.as_slice()) + extra_rhs;
    Ok((
        SafetyConstraint {
            row: s.lie_input(plant, z),
            rhs,
            provenance: Provenance { obstacle, kind },
            margin: s.h,
            barrier,
        },
        s,
    ))
}

/// `L_f H + L_g H u + grad H . d_hat >= -alpha(H)`.
pub fn build_naive(
    cbf: &ObstacleCbf,
    obstacle: usize,
    z: &[f64],
    d_hat: &DVector<f64>,
    plant: &impl ControlAffine,
) -> Result<SafetyConstraint> {
    assemble(cbf, obstacle, z, d_hat, plant, ConstraintKind::Naive, 0.0, 0.0).map(|(c, _)| c)
}

/// Naive constraint tightened by `b_d = delta * sum_i |dH/dz_i|`.
pub fn build_robust(
    cbf: &ObstacleCbf,
    obstacle: usize,
    z: &[f64],
    d_hat: &DVector<f64>,
    delta: f64,
    plant: &impl ControlAffine,
) -> Result<SafetyConstraint> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("error bound must be nonnegative (got {delta})")));
    }
    let b_d = delta * hocbf_surrogate(cbf, z).grad_l1();
    assemble(cbf, obstacle, z, d_hat, plant, ConstraintKind::Robust, 0.0, b_d).map(|(c, _)| c)
}

/// Constraint on `h_r = H - 0.5 delta^2 Tr(Omega^-1)`:
/// `L_f H + L_g H u + grad H . d_hat - b_d - Tr(Omega^-1) delta delta_dot >= -alpha(h_r)`.
#[allow(clippy::too_many_arguments)]
pub fn build_robust_adaptive(
    cbf: &ObstacleCbf,
    obstacle: usize,
    z: &[f64],
    d_hat: &DVector<f64>,
    delta: f64,
    delta_dot: f64,
    omega_diag: &[f64],
    plant: &impl ControlAffine,
) -> Result<SafetyConstraint> {
    if !(delta >= 0.0) {
        return Err(Error::Domain(format!("error bound must be nonnegative (got {delta})")));
    }
    if omega_diag.len() != plant.state_dim() {
        return Err(Error::dim("build_robust_adaptive (omega)", plant.state_dim(), omega_diag.len()));
    }
    if omega_diag.iter().any(|w| !(*w > 0.0)) {
        return Err(Error::Config("robust-adaptive weights must be positive".into()));
    }
    let trace_inv: f64 = omega_diag.iter().map(|w| 1.0 / w).sum();
    let shift = 0.5 * delta * delta * trace_inv;
    let b_d = delta * hocbf_surrogate(cbf, z).grad_l1();
    let extra = b_d + trace_inv * delta * delta_dot;
    let (c, _) = assemble(cbf, obstacle, z, d_hat, plant, ConstraintKind::RobustAdaptive, shift, extra)?;
    if c.barrier < 0.0 {
        log::warn!(
            "obstacle {obstacle}: state outside the shrunk safe set (h_r = {:.4e}, delta = {delta:.4e})",
            c.barrier
        );
    }
    Ok(c)
}

/// Smallest `h` over all logged steps and obstacles.
pub fn min_barrier(log: &RunLog) -> Result<f64> {
    if log.rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    Ok(log
        .rows
        .iter()
        .flat_map(|r| r.h.iter().copied())
        .fold(f64::INFINITY, f64::min))
}
