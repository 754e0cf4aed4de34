use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gains of the fixed-time adaptation law.
///
/// `gamma_diag` holds the diagonal of the `N^2 x N^2` gain matrix, `a` and `b`
/// weight the super- and sub-linear terms, `w > 2` sets their exponents, and
/// `s` is a certified lower bound on `sigma_N(Psi(x))` over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptationGains {
    gamma_diag: Vec<f64>,
    a: f64,
    b: f64,
    w: f64,
    s: f64,
}

impl AdaptationGains {
    pub fn new(gamma_diag: Vec<f64>, a: f64, b: f64, w: f64, s: f64) -> Result<Self> {
        if gamma_diag.is_empty() || gamma_diag.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::Config("gain matrix diagonal must be finite and positive".into()));
        }
        if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("gains a, b must be positive (a = {a}, b = {b})")));
        }
        if !(w > 2.0 && w.is_finite()) {
            return Err(Error::Config(format!("exponent w must exceed 2 (w = {w})")));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("singular-value bound s must be positive (s = {s})")));
        }
        Ok(Self {
            gamma_diag,
            a,
            b,
            w,
            s,
        })
    }

    /// `Gamma = gamma I` over `n_obs^2` parameters.
    pub fn isotropic(n_obs: usize, gamma: f64, a: f64, b: f64, w: f64, s: f64) -> Result<Self> {
        Self::new(vec![gamma; n_obs * n_obs], a, b, w, s)
    }

    /// Isotropic gains whose settling time equals `target`.
    pub fn for_settling_time(n_obs: usize, target: f64, a: f64, b: f64, w: f64, s: f64) -> Result<Self> {
        if !(target > 0.0 && target.is_finite()) {
            return Err(Error::Config(format!("target settling time must be positive (got {target})")));
        }
        let gamma = gamma_for_settling_time(target, a, b, w, s);
        Self::isotropic(n_obs, gamma, a, b, w, s)
    }

    pub fn gamma_diag(&self) -> &[f64] {
        &self.gamma_diag
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn n_params(&self) -> usize {
        self.gamma_diag.len()
    }

    pub fn lambda_max(&self) -> f64 {
        self.gamma_diag.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Single gain value when `Gamma` is a multiple of the identity.
    pub fn isotropic_gain(&self) -> Option<f64> {
        let g0 = self.gamma_diag[0];
        self.gamma_diag.iter().all(|&g| g == g0).then_some(g0)
    }

    pub fn settling_time(&self) -> f64 {
        settling_time(self)
    }
}

/// `T = w pi / (4 s lambda_max(Gamma) sqrt(a b))`.
pub fn settling_time(gains: &AdaptationGains) -> f64 {
    gains.w * PI / (4.0 * gains.s * gains.lambda_max() * (gains.a * gains.b).sqrt())
}

/// Gain `gamma` for which an isotropic `Gamma = gamma I` settles at `target`.
pub fn gamma_for_settling_time(target: f64, a: f64, b: f64, w: f64, s: f64) -> f64 {
    w * PI / (4.0 * s * target * (a * b).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_gains_settle_at_pi() {
        let g = AdaptationGains::isotropic(2, 1.0, 1.0, 1.0, 4.0, 1.0).unwrap();
        assert_relative_eq!(g.settling_time(), PI, max_relative = 1e-15);
    }

    #[test]
    fn case_study_gain_gives_point_twelve_seconds() {
        let gamma = gamma_for_settling_time(0.12, 1.0, 1.0, 4.0, 1.0);
        assert_relative_eq!(gamma, 4.0 * PI / (4.0 * 0.12), max_relative = 1e-15);
        assert!((gamma - 26.18).abs() < 5e-3);
        let g = AdaptationGains::isotropic(17, gamma, 1.0, 1.0, 4.0, 1.0).unwrap();
        assert_relative_eq!(g.settling_time(), 0.12, max_relative = 1e-14);
    }

    #[test]
    fn doubling_s_halves_t() {
        let g1 = AdaptationGains::isotropic(3, 2.0, 0.5, 3.0, 5.0, 1.0).unwrap();
        let g2 = AdaptationGains::isotropic(3, 2.0, 0.5, 3.0, 5.0, 2.0).unwrap();
        assert_relative_eq!(g2.settling_time(), 0.5 * g1.settling_time(), max_relative = 1e-15);
    }

    #[test]
    fn lambda_max_is_largest_diagonal_entry() {
        let g = AdaptationGains::new(vec![1.0, 4.0, 2.0, 3.0], 1.0, 1.0, 4.0, 1.0).unwrap();
        assert_eq!(g.lambda_max(), 4.0);
        assert_eq!(g.isotropic_gain(), None);
    }

    #[test]
    fn invalid_gains_rejected() {
        assert!(AdaptationGains::isotropic(2, 1.0, 0.0, 1.0, 4.0, 1.0).is_err());
        assert!(AdaptationGains::isotropic(2, 1.0, 1.0, 1.0, 2.0, 1.0).is_err());
        assert!(AdaptationGains::isotropic(2, -1.0, 1.0, 1.0, 4.0, 1.0).is_err());
        assert!(AdaptationGains::isotropic(2, 1.0, 1.0, 1.0, 4.0, 0.0).is_err());
    }
}
