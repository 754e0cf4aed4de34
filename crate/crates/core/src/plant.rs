//! Planar double integrator in a spatially varying wind, with measurement
//! noise and fixed-step integration.
//!
//! State layout is `z = (x, y, vx, vy)`; the input is the commanded
//! acceleration `u = (ax, ay)`.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const STATE_DIM: usize = 4;
pub const INPUT_DIM: usize = 2;

pub type State = [f64; STATE_DIM];
pub type Input = [f64; INPUT_DIM];

/// Control-affine model `z' = f(z) + g(z) u` (disturbance excluded).
pub trait ControlAffine {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn drift(&self, z: &[f64]) -> Vec<f64>;
    fn input_matrix(&self, z: &[f64]) -> DMatrix<f64>;
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DoubleIntegrator;

impl ControlAffine for DoubleIntegrator {
    fn state_dim(&self) -> usize {
        STATE_DIM
    }

    fn input_dim(&self) -> usize {
        INPUT_DIM
    }

    fn drift(&self, z: &[f64]) -> Vec<f64> {
        vec![z[2], z[3], 0.0, 0.0]
    }

    fn input_matrix(&self, _z: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0])
    }
}

/// Sinusoidal gust field with linear drag, saturated at `d_bound`.
///
/// `w_x = A_x sin(k1 y) cos(k2 x) + m_x`, `w_y = A_y cos(k3 x) sin(k4 y) + m_y`,
/// `d = (0, 0, C_d (w_x - v_x), C_d (w_y - v_y))` clamped componentwise to `[-D, D]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindField {
    pub amplitude: [f64; 2],
    pub wavenumbers: [f64; 4],
    pub offsets: [f64; 2],
    pub drag: f64,
    pub d_bound: f64,
}

impl Default for WindField {
    fn default() -> Self {
        Self {
            amplitude: [5.0, 5.0],
            wavenumbers: [0.5, 0.3, 0.4, 0.6],
            offsets: [2.0, -1.0],
            drag: 1.0,
            d_bound: 10.0,
        }
    }
}

impl WindField {
    /// Still air with the given drag; the disturbance is pure damping.
    pub fn calm(drag: f64, d_bound: f64) -> Self {
        Self {
            amplitude: [0.0, 0.0],
            wavenumbers: [0.0; 4],
            offsets: [0.0, 0.0],
            drag,
            d_bound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = self
            .amplitude
            .iter()
            .chain(&self.wavenumbers)
            .chain(&self.offsets)
            .chain([&self.drag, &self.d_bound]);
        if all.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("wind parameters must be finite".into()));
        }
        if self.drag < 0.0 {
            return Err(Error::Config(format!("drag coefficient must be nonnegative (got {})", self.drag)));
        }
        if !(self.d_bound > 0.0) {
            return Err(Error::Config(format!("disturbance bound must be positive (got {})", self.d_bound)));
        }
        Ok(())
    }

    pub fn velocity(&self, z: &[f64]) -> [f64; 2] {
        let (x, y) = (z[0], z[1]);
        let k = &self.wavenumbers;
        [
            self.amplitude[0] * (k[0] * y).sin() * (k[1] * x).cos() + self.offsets[0],
            self.amplitude[1] * (k[2] * x).cos() * (k[3] * y).sin() + self.offsets[1],
        ]
    }
}

pub fn wind_disturbance(wind: &WindField, z: &[f64]) -> State {
    let w = wind.velocity(z);
    let cap = wind.d_bound;
    [
        0.0,
        0.0,
        (wind.drag * (w[0] - z[2])).clamp(-cap, cap),
        (wind.drag * (w[1] - z[3])).clamp(-cap, cap),
    ]
}

pub fn plant_derivative(z: &State, u: &Input, wind: &WindField) -> State {
    let d = wind_disturbance(wind, z);
    [z[2], z[3], u[0] + d[2], u[1] + d[3]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IntegrationMethod {
    Euler,
    #[default]
    Rk4,
}

/// One fixed step with `u` held constant.
pub fn integrate_step(z: &State, u: &Input, wind: &WindField, dt: f64, method: IntegrationMethod) -> Result<State> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Domain(format!("integration step must be positive (dt = {dt})")));
    }
    let next = match method {
        IntegrationMethod::Euler => axpy(z, dt, &plant_derivative(z, u, wind)),
        IntegrationMethod::Rk4 => {
            let k1 = plant_derivative(z, u, wind);
            let k2 = plant_derivative(&axpy(z, 0.5 * dt, &k1), u, wind);
            let k3 = plant_derivative(&axpy(z, 0.5 * dt, &k2), u, wind);
            let k4 = plant_derivative(&axpy(z, dt, &k3), u, wind);
            std::array::from_fn(|i| z[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        }
    };
    if next.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { state: next.to_vec() });
    }
    Ok(next)
}

fn axpy(z: &State, h: f64, k: &State) -> State {
    std::array::from_fn(|i| z[i] + h * k[i])
}

/// Additive Gaussian measurement noise on the state and its derivative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma_x: f64,
    pub sigma_xdot: f64,
    #[serde(default)]
    pub seed: u64,
}

impl NoiseModel {
    pub fn off() -> Self {
        Self {
            sigma_x: 0.0,
            sigma_xdot: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_x >= 0.0 && self.sigma_xdot >= 0.0) || !self.sigma_x.is_finite() || !self.sigma_xdot.is_finite() {
            return Err(Error::Config("noise standard deviations must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Standard normal draw for `(seed, step, channel)`; independent of call order.
    pub fn standard_sample(&self, step: u64, channel: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(channel);
        // 256 words per step; a normal draw consumes far fewer
        rng.set_word_pos(u128::from(step) << 8);
        StandardNormal.sample(&mut rng)
    }
}

/// Channels `0..4` perturb the state, `4..8` its derivative.
pub fn measure(z: &State, z_dot: &State, noise: &NoiseModel, step: u64) -> (State, State) {
    let mut zm = *z;
    let mut zdm = *z_dot;
    if noise.sigma_x > 0.0 {
        for (i, v) in zm.iter_mut().enumerate() {
            *v += noise.sigma_x * noise.standard_sample(step, i as u64);
        }
    }
    if noise.sigma_xdot > 0.0 {
        for (i, v) in zdm.iter_mut().enumerate() {
            *v += noise.sigma_xdot * noise.standard_sample(step, (STATE_DIM + i) as u64);
        }
    }
    (zm, zdm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn matching_wind_gives_zero_disturbance() {
        let wind = WindField::default();
        let p = [0.7, -1.3];
        let w = wind.velocity(&[p[0], p[1], 0.0, 0.0]);
        let d = wind_disturbance(&wind, &[p[0], p[1], w[0], w[1]]);
        assert_eq!(d, [0.0; 4]);
    }

    #[test]
    fn clamp_at_bound() {
        // w_x = 5 at x = 0 with k1 y = pi/2 and zero offset
        let wind = WindField {
            amplitude: [5.0, 0.0],
            wavenumbers: [1.0, 1.0, 1.0, 1.0],
            offsets: [0.0, 0.0],
            drag: 1.0,
            d_bound: 10.0,
        };
        let z = [0.0, std::f64::consts::FRAC_PI_2, -6.0, 0.0];
        assert_relative_eq!(wind.velocity(&z)[0], 5.0, epsilon = 1e-12);
        assert_eq!(wind_disturbance(&wind, &z)[2], 10.0);
    }

    #[test]
    fn grid_respects_cap() {
        let wind = WindField::default();
        let mut max: f64 = 0.0;
        for i in 0..50 {
            for j in 0..50 {
                let x = -10.0 + 20.0 * i as f64 / 49.0;
                let y = -10.0 + 20.0 * j as f64 / 49.0;
                for &(vx, vy) in &[(5.0, 0.0), (-5.0, 0.0), (0.0, 5.0), (0.0, -5.0), (3.0, -4.0), (-3.5, 3.5)] {
                    let d = wind_disturbance(&wind, &[x, y, vx, vy]);
                    max = max.max(d[2].abs()).max(d[3].abs());
                }
            }
        }
        assert!(max <= 10.0);
    }

    #[test]
    fn input_cancels_disturbance() {
        let wind = WindField::default();
        let z = [1.0, 2.0, 0.3, -0.4];
        let d = wind_disturbance(&wind, &z);
        let zd = plant_derivative(&z, &[-d[2], -d[3]], &wind);
        assert_eq!(zd[2], 0.0);
        assert_eq!(zd[3], 0.0);
    }

    #[test]
    fn free_flight_in_still_air() {
        let wind = WindField::calm(0.0, 10.0);
        assert_eq!(plant_derivative(&[0.0, 0.0, 1.0, 2.0], &[0.0, 0.0], &wind), [1.0, 2.0, 0.0, 0.0]);
    }

    #[test]
    fn pure_drag_dissipates_speed() {
        let wind = WindField::calm(1.0, 10.0);
        let mut z = [0.0, 0.0, 3.0, -2.0];
        let mut speed = f64::hypot(z[2], z[3]);
        for _ in 0..5000 {
            z = integrate_step(&z, &[0.0, 0.0], &wind, 1e-3, IntegrationMethod::Rk4).unwrap();
            let s = f64::hypot(z[2], z[3]);
            assert!(s <= speed);
            speed = s;
        }
    }

    #[test]
    fn rk4_matches_exponential_decay() {
        let wind = WindField::calm(1.0, 100.0);
        let v0 = [3.0, -2.0];
        let mut z = [0.0, 0.0, v0[0], v0[1]];
        let dt = 1e-3;
        for _ in 0..1000 {
            z = integrate_step(&z, &[0.0, 0.0], &wind, dt, IntegrationMethod::Rk4).unwrap();
        }
        let e = (-1.0f64).exp();
        let want = [v0[0] * (1.0 - e), v0[1] * (1.0 - e), v0[0] * e, v0[1] * e];
        for i in 0..4 {
            assert!((z[i] - want[i]).abs() < 1e-8, "component {i}: {} vs {}", z[i], want[i]);
        }
    }

    #[test]
    fn euler_error_halves_with_dt() {
        let wind = WindField::calm(1.0, 100.0);
        let run = |dt: f64| {
            let mut z = [0.0, 0.0, 1.0, 0.0];
            let n = (1.0 / dt).round() as usize;
            for _ in 0..n {
                z = integrate_step(&z, &[0.0, 0.0], &wind, dt, IntegrationMethod::Euler).unwrap();
            }
            (z[2] - (-1.0f64).exp()).abs()
        };
        let ratio = run(1e-2) / run(5e-3);
        assert!((ratio - 2.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn zero_dynamics_stay_put() {
        let wind = WindField::calm(0.0, 10.0);
        let z = [1.5, -0.5, 0.0, 0.0];
        for m in [IntegrationMethod::Euler, IntegrationMethod::Rk4] {
            assert_eq!(integrate_step(&z, &[0.0, 0.0], &wind, 1e-3, m).unwrap(), z);
        }
    }

    #[test]
    fn divergence_reported() {
        let wind = WindField::calm(0.0, 10.0);
        let err = integrate_step(&[0.0; 4], &[f64::INFINITY, 0.0], &wind, 1e-3, IntegrationMethod::Euler);
        assert!(matches!(err, Err(Error::Divergence { .. })));
    }

    #[test]
    fn zero_noise_is_identity() {
        let z = [1.0, 2.0, 3.0, 4.0];
        let zd = [0.1, 0.2, 0.3, 0.4];
        assert_eq!(measure(&z, &zd, &NoiseModel::off(), 17), (z, zd));
    }

    #[test]
    fn noise_is_reproducible_and_channel_distinct() {
        let n = NoiseModel {
            sigma_x: 0.1,
            sigma_xdot: 0.1,
            seed: 42,
        };
        assert_eq!(n.standard_sample(7, 3), n.standard_sample(7, 3));
        assert_ne!(n.standard_sample(7, 3), n.standard_sample(7, 2));
        assert_ne!(n.standard_sample(7, 3), n.standard_sample(8, 3));
        let a = measure(&[0.0; 4], &[0.0; 4], &n, 5);
        let b = measure(&[0.0; 4], &[0.0; 4], &n, 5);
        assert_eq!(a, b);
    }

    #[test]
    fn sample_std_matches_sigma() {
        let n = NoiseModel {
            sigma_x: 0.1,
            sigma_xdot: 0.0,
            seed: 9,
        };
        let samples: Vec<f64> = (0..100_000u64).map(|k| measure(&[0.0; 4], &[0.0; 4], &n, k).0[0]).collect();
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        assert!((var.sqrt() - 0.1).abs() < 1e-3, "std {}", var.sqrt());
    }
}
