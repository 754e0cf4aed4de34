//! Batch least-squares generator fit.
//!
//! Minimizing `sum_k |Psi(x_k) lambda - J_k x_dot_k|^2` decouples by block:
//! block `i` of `lambda` solves `G l_i = c_i` with the shared Gram matrix
//! `G = sum_k psi_k psi_k^T` and `c_i = sum_k (J_k x_dot_k)_i psi_k`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::observables::LiftedFrame;

/// Relative eigenvalue cutoff below which the Gram matrix counts as singular.
pub const GRAM_TOLERANCE: f64 = 1e-10;

/// Running sufficient statistics for the batch fit.
#[derive(Debug, Clone)]
pub struct BatchAccumulator {
    gram: DMatrix<f64>,
    // column i holds c_i
    cross: DMatrix<f64>,
    count: usize,
}

impl BatchAccumulator {
    pub fn new(n_obs: usize) -> Self {
        Self {
            gram: DMatrix::zeros(n_obs, n_obs),
            cross: DMatrix::zeros(n_obs, n_obs),
            count: 0,
        }
    }

    pub fn n_obs(&self) -> usize {
        self.gram.nrows()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, frame: &LiftedFrame, x_dot: &[f64]) -> Result<()> {
        let n_obs = self.n_obs();
        if frame.n_obs() != n_obs {
            return Err(Error::dim("BatchAccumulator::push (basis)", n_obs, frame.n_obs()));
        }
        if x_dot.len() != frame.state_dim() {
            return Err(Error::dim("BatchAccumulator::push (x_dot)", frame.state_dim(), x_dot.len()));
        }
        let target = &frame.jac * DVector::from_column_slice(x_dot);
        self.gram.ger(1.0, &frame.psi, &frame.psi, 1.0);
        self.cross.ger(1.0, &frame.psi, &target, 1.0);
        self.count += 1;
        Ok(())
    }

    /// Least-squares estimate from all samples pushed so far.
    pub fn fit(&self) -> Result<DVector<f64>> {
        let n_obs = self.n_obs();
        if self.count < n_obs {
            return Err(Error::Domain(format!(
                "batch fit needs at least {n_obs} samples (have {})",
                self.count
            )));
        }
        let eig = self.gram.clone().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if !(min > GRAM_TOLERANCE * max.max(f64::MIN_POSITIVE)) {
            return Err(Error::IllConditionedData { min_eigenvalue: min });
        }
        let chol = self
            .gram
            .clone()
            .cholesky()
            .ok_or(Error::IllConditionedData { min_eigenvalue: min })?;
        let blocks = chol.solve(&self.cross);
        Ok(DVector::from_column_slice(blocks.as_slice()))
    }
}

pub fn batch_generator_fit(samples: &[(LiftedFrame, Vec<f64>)]) -> Result<DVector<f64>> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Domain("batch fit needs at least one sample".into()))?;
    let mut acc = BatchAccumulator::new(first.0.n_obs());
    for (frame, x_dot) in samples {
        acc.push(frame, x_dot)?;
    }
    acc.fit()
}
