//! Time-explicit bound on the disturbance reconstruction error.
//!
//! ```text
//! delta(t) = Lambda * sigma_max(W(t)) * tan^(w/2)(A(t))
//! Lambda   = sqrt(2 lambda_max(Gamma)) (a/b)^(w/4)
//! A(t)     = max(Xi - rate * t, 0)
//! Xi       = atan( sqrt(b/a) (0.5 l^T Gamma^-1 l)^(1/w) ),  l = 2D / sigma_min(W(0)) * 1
//! ```
//!
//! with `W(t) = J(x)^+ Psi(x)`. The decay rate of `A` defaults to
//! `2 s lambda_max(Gamma) sqrt(ab) / w`, which makes `A` vanish no later than the
//! settling time `T`; [`DecayRate::Literal`] uses `sqrt(ab) / w` instead.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::gains::AdaptationGains;
use crate::error::{Error, Result};
use crate::observables::LiftedFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayRate {
    /// `A(t)` reaches zero by the settling time.
    #[default]
    SettlingConsistent,
    /// `sqrt(ab)/w` without the gain factor.
    Literal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundParams {
    /// Sup-norm bound on the disturbance.
    pub d_bound: f64,
    pub lambda_gain: f64,
    pub xi: f64,
    pub sigma_min_w0: f64,
    /// Rate at which `A(t)` decreases.
    pub decay_rate: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundValue {
    pub delta: f64,
    /// `A(t)` in radians.
    pub angle: f64,
}

/// `delta_dot` and whether the `sigma_max(W)` rate was available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaDot {
    pub value: f64,
    pub analytic_only: bool,
}

impl ErrorBoundParams {
    /// Initializes the bound from the first lifted frame (with `lambda_hat(0) = 0`).
    pub fn new(gains: &AdaptationGains, d_bound: f64, frame0: &LiftedFrame, decay: DecayRate) -> Result<Self> {
        Self::from_sigma(gains, d_bound, frame0.sigma_min_w(), decay)
    }

    pub fn from_sigma(gains: &AdaptationGains, d_bound: f64, sigma_min_w0: f64, decay: DecayRate) -> Result<Self> {
        if !(d_bound > 0.0 && d_bound.is_finite()) {
            return Err(Error::Config(format!("disturbance bound D must be positive (got {d_bound})")));
        }
        if !(sigma_min_w0 > 0.0 && sigma_min_w0.is_finite()) {
            return Err(Error::Domain(format!("sigma_min(W(0)) must be positive (got {sigma_min_w0})")));
        }
        let (a, b, w) = (gains.a(), gains.b(), gains.w());
        let lambda_gain = (2.0 * gains.lambda_max()).sqrt() * (a / b).powf(w / 4.0);
        let l = 2.0 * d_bound / sigma_min_w0;
        let quad = 0.5 * l * l * gains.gamma_diag().iter().map(|g| 1.0 / g).sum::<f64>();
        let xi = ((b / a).sqrt() * quad.powf(1.0 / w)).atan();
        let base_rate = (a * b).sqrt() / w;
        let decay_rate = match decay {
            DecayRate::SettlingConsistent => 2.0 * gains.s() * gains.lambda_max() * base_rate,
            DecayRate::Literal => base_rate,
        };
        Ok(Self {
            d_bound,
            lambda_gain,
            xi,
            sigma_min_w0,
            decay_rate,
            w,
        })
    }

    pub fn angle(&self, t: f64) -> f64 {
        (self.xi - self.decay_rate * t).max(0.0)
    }

    /// Time after which the bound is identically zero.
    pub fn zero_time(&self) -> f64 {
        self.xi / self.decay_rate
    }

    pub fn delta(&self, sigma_max_w: f64, t: f64) -> Result<BoundValue> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("error bound queried at negative time {t}")));
        }
        let angle = self.angle(t);
        let delta = if angle == 0.0 {
            0.0
        } else {
            self.lambda_gain * sigma_max_w * angle.tan().powf(self.w / 2.0)
        };
        Ok(BoundValue { delta, angle })
    }

    /// `delta_dot = Lambda sigma' tan^(w/2)(A) - (w/2) rate Lambda sigma tan^(w/2-1)(A) sec^2(A)`.
    pub fn delta_dot(&self, sigma_max_w: f64, sigma_rate: Option<f64>, t: f64) -> Result<DeltaDot> {
        if !(t >= 0.0) {
            return Err(Error::Domain(format!("error bound queried at negative time {t}")));
        }
        let angle = self.angle(t);
        if angle == 0.0 {
            return Ok(DeltaDot {
                value: 0.0,
                analytic_only: sigma_rate.is_none(),
            });
        }
        let tan = angle.tan();
        let sec2 = 1.0 + tan * tan;
        let half_w = self.w / 2.0;
        let angular = -half_w * self.decay_rate * self.lambda_gain * sigma_max_w * tan.powf(half_w - 1.0) * sec2;
        let value = match sigma_rate {
            Some(rate) => self.lambda_gain * rate * tan.powf(half_w) + angular,
            None => angular,
        };
        Ok(DeltaDot {
            value,
            analytic_only: sigma_rate.is_none(),
        })
    }
}

pub fn error_bound(params: &ErrorBoundParams, frame: &LiftedFrame, t: f64) -> Result<BoundValue> {
    params.delta(frame.sigma_max_w(), t)
}

/// `delta_dot` at `t`, with `sigma_max(W)`'s rate taken from logged frames.
pub fn error_bound_derivative(
    params: &ErrorBoundParams,
    history: &SigmaHistory,
    t: f64,
    fd_step: f64,
) -> Result<DeltaDot> {
    let (_, sigma) = history
        .latest()
        .ok_or_else(|| Error::Domain("no sigma_max(W) sample logged".into()))?;
    let rate = history.rate(fd_step)?;
    params.delta_dot(sigma, rate, t)
}

/// Last three `(t, sigma_max(W(t)))` samples.
#[derive(Debug, Clone, Default)]
pub struct SigmaHistory {
    samples: VecDeque<(f64, f64)>,
}

impl SigmaHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: f64, sigma: f64) {
        if self.samples.len() == 3 {
            self.samples.pop_front();
        }
        self.samples.push_back((t, sigma));
    }

    pub fn latest(&self) -> Option<(f64, f64)> {
        self.samples.back().copied()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Central difference over the last three samples (midpoint rate), backward
    /// difference with two, `None` with fewer. Sample spacing below `fd_step`
    /// is treated as `fd_step`.
    pub fn rate(&self, fd_step: f64) -> Result<Option<f64>> {
        if !(fd_step > 0.0) {
            return Err(Error::Domain(format!("finite-difference step must be positive (got {fd_step})")));
        }
        let pick = match self.samples.len() {
            3 => Some((self.samples[0], self.samples[2])),
            2 => Some((self.samples[0], self.samples[1])),
            _ => None,
        };
        Ok(pick.map(|((t0, s0), (t1, s1))| (s1 - s0) / (t1 - t0).max(fd_step)))
    }
}
