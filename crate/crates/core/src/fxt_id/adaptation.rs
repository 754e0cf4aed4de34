//! Fixed-time adaptation of the vectorized Koopman generator.
//!
//! The continuous law is
//!
//! ```text
//! lambda_hat' = Gamma Psi(x)^T nu (a |nu|^(2/w) + b |nu|^(-2/w)),
//! nu          = J(x) x_dot - Psi(x) lambda_hat,
//! ```
//!
//! evaluated in the direction form `Gamma Psi^T nu_unit (a |nu|^(1+2/w) + b |nu|^(1-2/w))`
//! so nothing divides by a vanishing norm.
//!
//! Two discretizations are offered. [`AdaptationScheme::Euler`] is a single
//! explicit step. [`AdaptationScheme::FrozenExact`] integrates the law exactly
//! over the step with the state held fixed: for `Gamma = gamma I` the innovation
//! keeps its direction and its norm obeys a scalar ODE with closed-form
//! solution `|nu|^(2/w) = sqrt(b/a) tan(atan(sqrt(a/b) |nu0|^(2/w)) - (2k/w) sqrt(ab) t)`,
//! `k = gamma |psi|^2`, clamped at zero. This form is unconditionally stable.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::gains::AdaptationGains;
use crate::error::{Error, Result};
use crate::observables::{psi_block_apply, psi_block_transpose_apply, LiftedFrame};

/// Below this innovation norm the update is zero.
pub const DEFAULT_NU_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdaptationScheme {
    Euler,
    #[default]
    FrozenExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptOptions {
    pub scheme: AdaptationScheme,
    pub nu_floor: f64,
}

impl Default for AdaptOptions {
    fn default() -> Self {
        Self {
            scheme: AdaptationScheme::default(),
            nu_floor: DEFAULT_NU_FLOOR,
        }
    }
}

/// Current generator estimate and its adaptation clock.
#[derive(Debug, Clone)]
pub struct GeneratorEstimate {
    pub lambda_hat: DVector<f64>,
    pub gains: AdaptationGains,
    settling_time: f64,
    pub t: f64,
}

/// Innovation norms before and after one adaptation step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptReport {
    pub nu_before: f64,
    pub nu_after: f64,
}

impl GeneratorEstimate {
    pub fn zero(gains: AdaptationGains) -> Self {
        let n = gains.n_params();
        Self::with_initial(gains, DVector::zeros(n)).expect("zero estimate has matching length")
    }

    pub fn with_initial(gains: AdaptationGains, lambda_hat: DVector<f64>) -> Result<Self> {
        if lambda_hat.len() != gains.n_params() {
            return Err(Error::dim("GeneratorEstimate", gains.n_params(), lambda_hat.len()));
        }
        if lambda_hat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("initial generator estimate is not finite".into()));
        }
        let settling_time = gains.settling_time();
        Ok(Self {
            lambda_hat,
            gains,
            settling_time,
            t: 0.0,
        })
    }

    pub fn settling_time(&self) -> f64 {
        self.settling_time
    }

    /// Generator matrix `L` recovered from the column-stacked estimate.
    pub fn generator_matrix(&self) -> DMatrix<f64> {
        let n = (self.lambda_hat.len() as f64).sqrt().round() as usize;
        DMatrix::from_column_slice(n, n, self.lambda_hat.as_slice())
    }

    /// Advance the estimate by `dt` using the innovation at `frame`.
    pub fn adapt(
        &mut self,
        frame: &LiftedFrame,
        x_dot: &[f64],
        dt: f64,
        opts: &AdaptOptions,
    ) -> Result<AdaptReport> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("adaptation step must be positive (dt = {dt})")));
        }
        let n_obs = frame.n_obs();
        if self.lambda_hat.len() != n_obs * n_obs {
            return Err(Error::dim("adapt_step", n_obs * n_obs, self.lambda_hat.len()));
        }
        let nu = innovation(frame, x_dot, &self.lambda_hat)?;
        let r = scaled_norm(&nu);
        if !r.is_finite() {
            return Err(Error::NumericalBlowup { nu_norm: r, dt });
        }
        let report = if r <= opts.nu_floor {
            AdaptReport {
                nu_before: r,
                nu_after: r,
            }
        } else {
            match opts.scheme {
                AdaptationScheme::Euler => self.euler_step(frame, &nu, r, dt)?,
                AdaptationScheme::FrozenExact => self.exact_step(frame, &nu, r, dt)?,
            }
        };
        self.t += dt;
        Ok(report)
    }

    fn euler_step(&mut self, frame: &LiftedFrame, nu: &DVector<f64>, r: f64, dt: f64) -> Result<AdaptReport> {
        let (a, b, w) = (self.gains.a(), self.gains.b(), self.gains.w());
        let magnitude = a * r.powf(1.0 + 2.0 / w) + b * r.powf(1.0 - 2.0 / w);
        let unit = nu / r;
        let dir = psi_block_transpose_apply(frame.psi.as_slice(), unit.as_slice())?;
        let mut next = self.lambda_hat.clone();
        for ((l, d), g) in next.iter_mut().zip(dir.iter()).zip(self.gains.gamma_diag()) {
            *l += dt * g * d * magnitude;
        }
        if !magnitude.is_finite() || next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { nu_norm: r, dt });
        }
        self.lambda_hat = next;
        let nu_after = euler_innovation_after(frame, nu, &dir, dt * magnitude, &self.gains);
        Ok(AdaptReport {
            nu_before: r,
            nu_after,
        })
    }

    fn exact_step(&mut self, frame: &LiftedFrame, nu: &DVector<f64>, r: f64, dt: f64) -> Result<AdaptReport> {
        let gamma = self.gains.isotropic_gain().ok_or_else(|| {
            Error::Config("the frozen-exact adaptation scheme needs an isotropic gain matrix".into())
        })?;
        let psi_sq = frame.psi.norm_squared();
        let r_next = frozen_norm_after(r, gamma * psi_sq, &self.gains, dt);
        let shrink = 1.0 - r_next / r;
        let dir = psi_block_transpose_apply(frame.psi.as_slice(), nu.as_slice())?;
        let scale = shrink / psi_sq;
        let mut next = self.lambda_hat.clone();
        next.axpy(scale, &dir, 1.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalBlowup { nu_norm: r, dt });
        }
        self.lambda_hat = next;
        Ok(AdaptReport {
            nu_before: r,
            nu_after: r_next,
        })
    }
}

// Post-step innovation norm for the Euler update without recomputing J x_dot:
// nu_next = nu - step * Psi Gamma Psi^T nu_unit.
fn euler_innovation_after(
    frame: &LiftedFrame,
    nu: &DVector<f64>,
    dir: &DVector<f64>,
    step: f64,
    gains: &AdaptationGains,
) -> f64 {
    let weighted: Vec<f64> = dir.iter().zip(gains.gamma_diag()).map(|(d, g)| d * g).collect();
    let applied = psi_block_apply(frame.psi.as_slice(), &weighted).expect("dimensions checked");
    scaled_norm(&(nu - applied * step))
}

/// Euclidean norm that neither underflows nor overflows when squaring.
fn scaled_norm(v: &DVector<f64>) -> f64 {
    let m = v.amax();
    if m == 0.0 || !m.is_finite() {
        return m;
    }
    m * (v / m).norm()
}

/// Norm of the innovation after holding the frame fixed for `dt`, for the
/// scalar rate `k = gamma |psi|^2`.
pub fn frozen_norm_after(r0: f64, k: f64, gains: &AdaptationGains, dt: f64) -> f64 {
    let (a, b, w) = (gains.a(), gains.b(), gains.w());
    let y0 = r0.powf(2.0 / w);
    let theta0 = ((a / b).sqrt() * y0).atan();
    let theta1 = theta0 - (2.0 * k / w) * (a * b).sqrt() * dt;
    if theta1 <= 0.0 {
        0.0
    } else {
        ((b / a).sqrt() * theta1.tan()).powf(w / 2.0).min(r0)
    }
}

/// `nu = J(x) x_dot - Psi(x) lambda_hat`.
pub fn innovation(frame: &LiftedFrame, x_dot: &[f64], lambda_hat: &DVector<f64>) -> Result<DVector<f64>> {
    if x_dot.len() != frame.state_dim() {
        return Err(Error::dim("innovation", frame.state_dim(), x_dot.len()));
    }
    let lifted = &frame.jac * DVector::from_column_slice(x_dot);
    let predicted = psi_block_apply(frame.psi.as_slice(), lambda_hat.as_slice())?;
    Ok(lifted - predicted)
}

/// Value-returning form of [`GeneratorEstimate::adapt`].
pub fn adapt_step(
    est: &GeneratorEstimate,
    frame: &LiftedFrame,
    x_dot: &[f64],
    dt: f64,
    opts: &AdaptOptions,
) -> Result<GeneratorEstimate> {
    let mut next = est.clone();
    next.adapt(frame, x_dot, dt, opts)?;
    Ok(next)
}

/// `d_hat = J^+ Psi lambda_hat - (f(x) + g(x) u)`.
pub fn reconstruct_disturbance(
    frame: &LiftedFrame,
    lambda_hat: &DVector<f64>,
    f_x: &[f64],
    g_x: &DMatrix<f64>,
    u: &[f64],
) -> Result<DVector<f64>> {
    let n = frame.state_dim();
    if f_x.len() != n {
        return Err(Error::dim("reconstruct_disturbance (drift)", n, f_x.len()));
    }
    if g_x.nrows() != n || g_x.ncols() != u.len() {
        return Err(Error::dim("reconstruct_disturbance (input)", g_x.ncols(), u.len()));
    }
    let predicted = psi_block_apply(frame.psi.as_slice(), lambda_hat.as_slice())?;
    let known = DVector::from_column_slice(f_x) + g_x * DVector::from_column_slice(u);
    Ok(&frame.jac_pinv * predicted - known)
}

/// Lyapunov function `0.5 err^T Gamma^-1 err` for a known generator error.
pub fn lyapunov(gains: &AdaptationGains, lambda_err: &DVector<f64>) -> f64 {
    0.5 * lambda_err
        .iter()
        .zip(gains.gamma_diag())
        .map(|(e, g)| e * e / g)
        .sum::<f64>()
}
