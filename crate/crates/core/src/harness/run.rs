use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::config::ScenarioConfig;
use crate::control::{control_step, reference_at, ControllerConfig, Regime};
use crate::error::{Error, Result};
use crate::fxt_id::{
    error_bound_derivative, innovation, reconstruct_disturbance, BatchAccumulator, DisturbanceEstimate, ErrorBoundParams,
    GeneratorEstimate, SigmaHistory,
};
use crate::observables::lift;
use crate::plant::{
    integrate_step, measure, plant_derivative, wind_disturbance, ControlAffine, DoubleIntegrator, Input, State,
    STATE_DIM,
};

/// One full-rate simulation step.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub t: f64,
    pub z: State,
    pub z_meas: State,
    pub u: Input,
    pub u0: Input,
    pub d_true: State,
    pub d_hat: State,
    pub delta: f64,
    pub delta_dot: f64,
    pub h: Vec<f64>,
    pub qp_active: u64,
    pub qp_iters: usize,
    pub slack: f64,
    /// Innovation norm left after the adaptation step (batch regime: residual of the current fit).
    pub nu: f64,
    /// `|lambda_hat|`, which grows when estimates accumulate in the nullspace of `Psi`.
    pub lambda_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub regime: Regime,
    pub seed: u64,
    pub noise: bool,
    pub steps: usize,
    pub dt: f64,
    pub settling_time: f64,
    pub min_h: f64,
    pub min_h_per_obstacle: Vec<f64>,
    pub safe: bool,
    /// `max |d - d_hat|_inf` over `t >= T`.
    pub max_error_after_settling: f64,
    /// Error after `T` stayed within 1% of the disturbance bound.
    pub settled: bool,
    /// Steps where `|d - d_hat|_inf > delta + 1e-6`.
    pub bound_violations: usize,
    pub max_bound_excess: f64,
    pub delta_zero_after_settling: bool,
    pub delta_monotone: bool,
    /// `sigma_N(Psi) >= s` held at every step.
    pub s_certified: bool,
    pub slack_steps: usize,
    pub max_slack: f64,
    pub rms_tracking_error: f64,
    pub wall_clock_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub regime: Regime,
    pub rows: Vec<LogRow>,
    pub summary: RunSummary,
    pub decimation: usize,
}

/// Tolerance added to the error bound when counting violations.
pub const BOUND_SLACK: f64 = 1e-6;

enum Identifier {
    FixedTime(GeneratorEstimate),
    Batch {
        acc: BatchAccumulator,
        lambda_hat: Option<DVector<f64>>,
        next_refit: f64,
        period: f64,
    },
}

pub fn run_scenario(cfg: &ScenarioConfig, regime: Regime, seed: u64, noise_on: bool) -> Result<RunLog> {
    cfg.validate()?;
    let started = Instant::now();
    let plant = DoubleIntegrator;
    let basis = cfg.basis.build(STATE_DIM)?;
    let gains = cfg.adaptation.gains(basis.len())?;
    let opts = cfg.adaptation.options();
    let settling_time = gains.settling_time();
    let filter = cfg.safety.filter()?;
    let noise = cfg.noise.model(noise_on, seed);
    let ctrl = ControllerConfig {
        regime,
        ..cfg.controller.clone()
    };
    let dt = cfg.integration.dt;
    let steps = cfg.integration.steps();
    let g_mat: DMatrix<f64> = plant.input_matrix(&[0.0; STATE_DIM]);

    let mut ident = match regime {
        Regime::Naive => Identifier::Batch {
            acc: BatchAccumulator::new(basis.len()),
            lambda_hat: None,
            next_refit: cfg.adaptation.batch_refit_period,
            period: cfg.adaptation.batch_refit_period,
        },
        _ => Identifier::FixedTime(GeneratorEstimate::zero(gains.clone())),
    };
    let mut bound: Option<ErrorBoundParams> = None;
    let mut sigma_hist = SigmaHistory::new();

    let mut z = cfg.plant.initial_state;
    let mut u_prev: Input = [0.0; 2];
    let mut rows = Vec::with_capacity(steps);
    let mut s_certified = true;

    for k in 0..steps {
        let t = k as f64 * dt;
        let at = |e: Error, z: &State| Error::AtStep {
            step: k,
            t,
            state: z.to_vec(),
            source: Box::new(e),
        };
        let z_dot = plant_derivative(&z, &u_prev, &cfg.wind);
        let (z_meas, z_dot_meas) = measure(&z, &z_dot, &noise, k as u64);
        let frame = lift(&basis, &z_meas).map_err(|e| at(e, &z))?;
        if frame.psi_norm() < gains.s() {
            s_certified = false;
        }
        let drift = plant.drift(&z_meas);

        let (est, nu, lambda_norm) = match &mut ident {
            Identifier::FixedTime(gen) => {
                let report = gen.adapt(&frame, &z_dot_meas, dt, &opts).map_err(|e| at(e, &z))?;
                let params = match &bound {
                    Some(p) => p,
                    None => bound.insert(
                        ErrorBoundParams::new(&gains, cfg.wind.d_bound, &frame, cfg.adaptation.decay_rate)
                            .map_err(|e| at(e, &z))?,
                    ),
                };
                let d_hat = reconstruct_disturbance(&frame, &gen.lambda_hat, &drift, &g_mat, &u_prev)
                    .map_err(|e| at(e, &z))?;
                sigma_hist.push(gen.t, frame.sigma_max_w());
                let delta = params.delta(frame.sigma_max_w(), gen.t).map_err(|e| at(e, &z))?.delta;
                let delta_dot = error_bound_derivative(params, &sigma_hist, gen.t, dt).map_err(|e| at(e, &z))?.value;
                (
                    DisturbanceEstimate {
                        d_hat,
                        delta,
                        delta_dot,
                        sigma_max_w: frame.sigma_max_w(),
                    },
                    report.nu_after,
                    gen.lambda_hat.norm(),
                )
            }
            Identifier::Batch {
                acc,
                lambda_hat,
                next_refit,
                period,
            } => {
                acc.push(&frame, &z_dot_meas).map_err(|e| at(e, &z))?;
                if t + 0.5 * dt >= *next_refit {
                    match acc.fit() {
                        Ok(l) => *lambda_hat = Some(l),
                        Err(e) => log::warn!("batch refit at t = {t:.3} s failed ({e}); keeping previous fit"),
                    }
                    *next_refit += *period;
                }
                let fit = lambda_hat.clone().unwrap_or_else(|| DVector::zeros(frame.n_obs() * frame.n_obs()));
                let nu = innovation(&frame, &z_dot_meas, &fit).map_err(|e| at(e, &z))?.norm();
                let d_hat = match lambda_hat {
                    Some(l) => reconstruct_disturbance(&frame, l, &drift, &g_mat, &u_prev).map_err(|e| at(e, &z))?,
                    None => DVector::zeros(STATE_DIM),
                };
                (DisturbanceEstimate::exact(d_hat), nu, fit.norm())
            }
        };

        let (u, diag) =
            control_step(&ctrl, &cfg.reference, &filter, &z_meas, t, &est, &plant).map_err(|e| at(e, &z))?;

        rows.push(LogRow {
            t,
            z,
            z_meas,
            u,
            u0: diag.u0,
            d_true: wind_disturbance(&cfg.wind, &z),
            d_hat: std::array::from_fn(|i| est.d_hat[i]),
            delta: est.delta,
            delta_dot: est.delta_dot,
            h: filter.obstacles.iter().map(|o| o.h(&z)).collect(),
            qp_active: diag.active_mask(),
            qp_iters: diag.iterations,
            slack: diag.total_slack(),
            nu,
            lambda_norm,
        });

        z = integrate_step(&z, &u, &cfg.wind, dt, cfg.integration.method).map_err(|e| at(e, &z))?;
        u_prev = u;
    }

    let summary = summarize(
        cfg,
        regime,
        seed,
        noise_on,
        &rows,
        settling_time,
        s_certified,
        started.elapsed().as_secs_f64() * 1e3,
    )?;
    Ok(RunLog {
        regime,
        rows,
        summary,
        decimation: cfg.integration.decimation,
    })
}

pub fn disturbance_error(row: &LogRow) -> f64 {
    row.d_true
        .iter()
        .zip(&row.d_hat)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    cfg: &ScenarioConfig,
    regime: Regime,
    seed: u64,
    noise: bool,
    rows: &[LogRow],
    settling_time: f64,
    s_certified: bool,
    wall_clock_ms: f64,
) -> Result<RunSummary> {
    if rows.is_empty() {
        return Err(Error::EmptyLog);
    }
    let n_obs = cfg.safety.obstacles.len();
    let mut min_h_per_obstacle = vec![f64::INFINITY; n_obs];
    let mut max_err: f64 = 0.0;
    let mut violations = 0;
    let mut max_excess = f64::NEG_INFINITY;
    let mut delta_zero = true;
    let mut delta_monotone = true;
    let mut slack_steps = 0;
    let mut max_slack: f64 = 0.0;
    let mut track_sq = 0.0;
    let mut prev_delta = f64::INFINITY;
    for r in rows {
        for (m, h) in min_h_per_obstacle.iter_mut().zip(&r.h) {
            *m = m.min(*h);
        }
        let err = disturbance_error(r);
        if r.t >= settling_time {
            max_err = max_err.max(err);
        }
        if r.t > settling_time && r.delta != 0.0 {
            delta_zero = false;
        }
        if r.delta > prev_delta {
            delta_monotone = false;
        }
        prev_delta = r.delta;
        let excess = err - r.delta;
        max_excess = max_excess.max(excess);
        if excess > BOUND_SLACK {
            violations += 1;
        }
        if r.slack > 0.0 {
            slack_steps += 1;
            max_slack = max_slack.max(r.slack);
        }
        let rp = reference_at(&cfg.reference, r.t)?;
        track_sq += (r.z[0] - rp.pos[0]).powi(2) + (r.z[1] - rp.pos[1]).powi(2);
    }
    let min_h = min_h_per_obstacle.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(RunSummary {
        regime,
        seed,
        noise,
        steps: rows.len(),
        dt: cfg.integration.dt,
        settling_time,
        min_h,
        safe: min_h >= 0.0,
        min_h_per_obstacle,
        max_error_after_settling: max_err,
        settled: max_err <= 0.01 * cfg.wind.d_bound,
        bound_violations: violations,
        max_bound_excess: max_excess,
        delta_zero_after_settling: delta_zero,
        delta_monotone,
        s_certified,
        slack_steps,
        max_slack,
        rms_tracking_error: (track_sq / rows.len() as f64).sqrt(),
        wall_clock_ms,
    })
}
