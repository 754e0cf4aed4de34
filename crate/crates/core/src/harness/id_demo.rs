//! Fixed-time identification on `x' = -2x` with the basis `{1, x, x^2}`, whose
//! generator `diag(0, -2, -4)` is known exactly.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fxt_id::{lyapunov, AdaptOptions, AdaptationGains, AdaptationScheme, GeneratorEstimate};
use crate::observables::{lift, make_monomial_basis, psi_block_apply};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdDemoConfig {
    pub x0: f64,
    pub settling_time: f64,
    pub dt: f64,
    /// Simulated span as a multiple of the settling time.
    pub horizon_factor: f64,
    pub initial_norms: Vec<f64>,
    pub seed: u64,
    pub scheme: AdaptationScheme,
}

impl Default for IdDemoConfig {
    fn default() -> Self {
        Self {
            x0: 0.2,
            settling_time: 0.12,
            dt: 1e-4,
            horizon_factor: 2.0,
            initial_norms: vec![0.0, 1.0, 10.0, 100.0, 1000.0],
            seed: 7,
            scheme: AdaptationScheme::FrozenExact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdDemoCase {
    pub initial_norm: f64,
    /// `|Psi(x) lambda_err|` at `t = 0`.
    pub err0: f64,
    pub err_at_settling: f64,
    pub max_err_after_settling: f64,
    /// `1e-3 * max(1, err0)`.
    pub threshold: f64,
    pub within_threshold: bool,
    /// Earliest time after which the error stays within the threshold.
    pub convergence_time: Option<f64>,
    pub lambda_err_at_settling: f64,
    pub lyapunov_nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdDemoReport {
    pub settling_time: f64,
    pub cases: Vec<IdDemoCase>,
    /// `(max - min) / max` of the convergence times, when all converged.
    pub convergence_spread: Option<f64>,
    /// Some case ends with `|lambda_err| > 0.1` while `|Psi lambda_err| <= 1e-3`.
    pub nullspace_witness: bool,
}

impl IdDemoReport {
    pub fn all_within_threshold(&self) -> bool {
        self.cases.iter().all(|c| c.within_threshold)
    }

    pub fn spread_ok(&self) -> bool {
        self.convergence_spread.is_some_and(|s| s < 0.1)
    }
}

/// `vec(diag(0, -2, -4))`.
pub fn exact_generator() -> DVector<f64> {
    let mut l = DVector::zeros(9);
    l[4] = -2.0;
    l[8] = -4.0;
    l
}

pub fn run_id_demo(cfg: &IdDemoConfig) -> Result<IdDemoReport> {
    if !(cfg.dt > 0.0 && cfg.settling_time > 0.0 && cfg.horizon_factor >= 1.0) {
        return Err(Error::Config("id-demo needs positive dt, settling time, and horizon factor >= 1".into()));
    }
    let basis = make_monomial_basis(1, &[0], 2, true)?;
    let gains = AdaptationGains::for_settling_time(basis.len(), cfg.settling_time, 1.0, 1.0, 4.0, 1.0)?;
    let t_settle = gains.settling_time();
    let opts = AdaptOptions {
        scheme: cfg.scheme,
        ..Default::default()
    };
    let truth = exact_generator();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps = (cfg.horizon_factor * t_settle / cfg.dt).round() as usize;
    let settle_step = (t_settle / cfg.dt).ceil() as usize;

    let mut cases = Vec::new();
    for &norm in &cfg.initial_norms {
        let dir = DVector::from_fn(9, |_, _| StandardNormal.sample(&mut rng));
        let init = if norm == 0.0 { DVector::zeros(9) } else { dir.normalize() * norm };
        let mut est = GeneratorEstimate::with_initial(gains.clone(), init)?;
        let mut errs = Vec::with_capacity(steps + 1);
        let mut lambda_err_at_settling = f64::NAN;
        let mut v_prev = f64::INFINITY;
        let mut lyap_ok = true;
        for k in 0..=steps {
            let x = cfg.x0 * (-2.0 * k as f64 * cfg.dt).exp();
            let frame = lift(&basis, &[x])?;
            let lambda_err = &truth - &est.lambda_hat;
            errs.push(psi_block_apply(frame.psi.as_slice(), lambda_err.as_slice())?.norm());
            let v = lyapunov(&gains, &lambda_err);
            if v > v_prev * (1.0 + 1e-12) + 1e-300 {
                lyap_ok = false;
            }
            v_prev = v;
            if k == settle_step {
                lambda_err_at_settling = lambda_err.norm();
            }
            if k < steps {
                est.adapt(&frame, &[-2.0 * x], cfg.dt, &opts)?;
            }
        }
        let err0 = errs[0];
        let threshold = 1e-3 * err0.max(1.0);
        let after = &errs[settle_step.min(steps)..];
        let max_after = after.iter().copied().fold(0.0, f64::max);
        let last_bad = errs.iter().rposition(|&e| e > threshold);
        let convergence_time = match last_bad {
            None => Some(0.0),
            Some(i) if i < steps => Some((i + 1) as f64 * cfg.dt),
            Some(_) => None,
        };
        cases.push(IdDemoCase {
            initial_norm: norm,
            err0,
            err_at_settling: errs[settle_step.min(steps)],
            max_err_after_settling: max_after,
            threshold,
            within_threshold: max_after <= threshold,
            convergence_time,
            lambda_err_at_settling,
            lyapunov_nonincreasing: lyap_ok,
        });
    }
    let times: Option<Vec<f64>> = cases.iter().map(|c| c.convergence_time).collect();
    let convergence_spread = times.map(|ts| {
        let max = ts.iter().copied().fold(0.0, f64::max);
        let min = ts.iter().copied().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            (max - min) / max
        }
    });
    let nullspace_witness = cases
        .iter()
        .any(|c| c.lambda_err_at_settling > 0.1 && c.err_at_settling <= 1e-3);
    Ok(IdDemoReport {
        settling_time: t_settle,
        cases,
        convergence_spread,
        nullspace_witness,
    })
}
