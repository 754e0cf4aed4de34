//! Nominal lemniscate tracking and the CBF-QP safety filter wrapped around it.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxt_id::DisturbanceEstimate;
use crate::plant::{ControlAffine, Input, INPUT_DIM};
use crate::qp::{solve_capped, solve_with_slack_capped, QpProblem, QpRow, QpStatus, DEFAULT_MAX_ITERATIONS};
use crate::safety::{build_naive, build_robust, build_robust_adaptive, ObstacleCbf, SafetyConstraint};

/// Lemniscate of Gerono `x = A sin(wt)`, `y = A sin(wt) cos(wt)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub amplitude: f64,
    pub omega: f64,
}

impl Default for Reference {
    fn default() -> Self {
        Self {
            amplitude: 4.0,
            omega: 0.2 * PI,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefPoint {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    pub acc: [f64; 2],
}

pub fn reference_at(r: &Reference, t: f64) -> Result<RefPoint> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("reference queried at negative time {t}")));
    }
    let (a, w) = (r.amplitude, r.omega);
    let (s1, c1) = (w * t).sin_cos();
    let (s2, c2) = (2.0 * w * t).sin_cos();
    Ok(RefPoint {
        pos: [a * s1, 0.5 * a * s2],
        vel: [a * w * c1, a * w * c2],
        acc: [-a * w * w * s1, -2.0 * a * w * w * s2],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Nominal,
    Naive,
    Robust,
    RobustAdaptive,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::Nominal, Regime::Naive, Regime::Robust, Regime::RobustAdaptive];

    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Nominal => "nominal",
            Regime::Naive => "naive",
            Regime::Robust => "robust",
            Regime::RobustAdaptive => "robust-adaptive",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nominal" => Ok(Regime::Nominal),
            "naive" => Ok(Regime::Naive),
            "robust" => Ok(Regime::Robust),
            "robust-adaptive" | "robust_adaptive" => Ok(Regime::RobustAdaptive),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    pub regime: Regime,
    pub kp: f64,
    pub kd: f64,
    #[serde(default)]
    pub u_max: Option<f64>,
    /// `None` disables the slack fallback.
    #[serde(default)]
    pub slack_weight: Option<f64>,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
}

fn default_max_iterations() -> usize {
    DEFAULT_MAX_ITERATIONS
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            regime: Regime::Robust,
            kp: 4.0,
            kd: 4.0,
            u_max: None,
            slack_weight: Some(crate::qp::DEFAULT_SLACK_WEIGHT),
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp > 0.0 && self.kd > 0.0 && self.kp.is_finite() && self.kd.is_finite()) {
            return Err(Error::Config(format!("tracking gains must be positive (kp = {}, kd = {})", self.kp, self.kd)));
        }
        if let Some(u) = self.u_max {
            if !(u > 0.0) {
                return Err(Error::Config(format!("u_max must be positive (got {u})")));
            }
        }
        if let Some(w) = self.slack_weight {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("slack weight must be positive (got {w})")));
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("QP iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// `u0 = acc* + kd (vel* - v) + kp (pos* - p)`, optionally saturated.
pub fn nominal_input(cfg: &ControllerConfig, r: &Reference, z: &[f64], t: f64) -> Result<Input> {
    let rp = reference_at(r, t)?;
    let mut u: Input = std::array::from_fn(|i| rp.acc[i] + cfg.kd * (rp.vel[i] - z[2 + i]) + cfg.kp * (rp.pos[i] - z[i]));
    if let Some(m) = cfg.u_max {
        for v in &mut u {
            *v = v.clamp(-m, m);
        }
    }
    Ok(u)
}

/// Obstacles plus the robust-adaptive weights `Omega = diag(omega_diag)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SafetyFilter {
    pub obstacles: Vec<ObstacleCbf>,
    pub omega_diag: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlDiagnostics {
    pub u0: Input,
    pub constraints: Vec<SafetyConstraint>,
    pub active_set: Vec<usize>,
    pub iterations: usize,
    pub slack: Vec<f64>,
    pub kkt_residual: f64,
}

impl ControlDiagnostics {
    pub fn total_slack(&self) -> f64 {
        self.slack.iter().map(|s| s.abs()).sum()
    }

    /// Bit `i` set when obstacle row `i` is active.
    pub fn active_mask(&self) -> u64 {
        self.active_set.iter().fold(0, |m, &i| m | (1 << i))
    }
}

pub fn collect_constraints(
    regime: Regime,
    filter: &SafetyFilter,
    z: &[f64],
    est: &DisturbanceEstimate,
    plant: &impl ControlAffine,
) -> Result<Vec<SafetyConstraint>> {
    filter
        .obstacles
        .iter()
        .enumerate()
        .filter(|_| regime != Regime::Nominal)
        .map(|(i, o)| match regime {
            Regime::Nominal => unreachable!("filtered above"),
            Regime::Naive => build_naive(o, i, z, &est.d_hat, plant),
            Regime::Robust => build_robust(o, i, z, &est.d_hat, est.delta, plant),
            Regime::RobustAdaptive => {
                build_robust_adaptive(o, i, z, &est.d_hat, est.delta, est.delta_dot, &filter.omega_diag, plant)
            }
        })
        .collect()
}

pub fn control_step(
    cfg: &ControllerConfig,
    reference: &Reference,
    filter: &SafetyFilter,
    z: &[f64],
    t: f64,
    est: &DisturbanceEstimate,
    plant: &impl ControlAffine,
) -> Result<(Input, ControlDiagnostics)> {
    let u0 = nominal_input(cfg, reference, z, t)?;
    let constraints = collect_constraints(cfg.regime, filter, z, est, plant)?;
    let problem = QpProblem::new(
        u0.to_vec(),
        constraints
            .iter()
            .map(|c| QpRow {
                a: c.row.clone(),
                b: c.rhs,
            })
            .collect(),
    )?;
    let sol = match cfg.slack_weight {
        Some(w) => solve_with_slack_capped(&problem, w, cfg.max_iterations)?,
        None => {
            let s = solve_capped(&problem, cfg.max_iterations)?;
            if s.status == QpStatus::Infeasible {
                return Err(Error::ControllerInfeasible { state: z.to_vec() });
            }
            s
        }
    };
    let u: Input = std::array::from_fn(|i| sol.u_star[i]);
    debug_assert_eq!(u.len(), INPUT_DIM);
    Ok((
        u,
        ControlDiagnostics {
            u0,
            constraints,
            active_set: sol.active_set.into_iter().filter(|&i| i < filter.obstacles.len()).collect(),
            iterations: sol.iterations,
            slack: sol.slack,
            kkt_residual: sol.kkt_residual,
        },
    ))
}
