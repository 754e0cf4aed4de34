//! Fixed-time generator identification with disturbance reconstruction and its
//! time-explicit error bound. A batch least-squares fit serves as the baseline.

mod adaptation;
mod batch;
mod bound;
mod gains;

pub use adaptation::{
    adapt_step, frozen_norm_after, innovation, lyapunov, reconstruct_disturbance, AdaptOptions, AdaptReport,
    AdaptationScheme, GeneratorEstimate, DEFAULT_NU_FLOOR,
};
pub use batch::{batch_generator_fit, BatchAccumulator, GRAM_TOLERANCE};
pub use bound::{
    error_bound, error_bound_derivative, BoundValue, DecayRate, DeltaDot, ErrorBoundParams, SigmaHistory,
};
pub use gains::{gamma_for_settling_time, settling_time, AdaptationGains};

use nalgebra::DVector;

/// Reconstructed disturbance with its bound at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceEstimate {
    pub d_hat: DVector<f64>,
    pub delta: f64,
    pub delta_dot: f64,
    pub sigma_max_w: f64,
}

impl DisturbanceEstimate {
    /// Exact-knowledge estimate with zero bound.
    pub fn exact(d: DVector<f64>) -> Self {
        Self {
            d_hat: d,
            delta: 0.0,
            delta_dot: 0.0,
            sigma_max_w: 0.0,
        }
    }
}
