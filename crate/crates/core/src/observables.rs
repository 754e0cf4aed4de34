//! Observable dictionaries and the lifted frame at a single state.
//!
//! A [`BasisSet`] is an ordered list of scalar observables `psi_i(x)`. Lifting a
//! state produces the value vector `psi(x)` together with its `N x n` Jacobian.
//! The Jacobian's pseudoinverse maps lifted derivatives back to the state space.
//!
//! The generator regression uses the block matrix `Psi(x) = I_N (x) psi(x)^T`
//! of shape `N x N^2`. It is never formed: with `lambda = vec(L)` stacked by
//! columns, `Psi(x) lambda = L^T psi(x)` and `Psi(x)^T v` places `v_k psi(x)` in
//! block `k`. Every nonzero singular value of `Psi(x)` equals `|psi(x)|`.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative cutoff below which a Jacobian singular value counts as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// A single scalar observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BasisFunction {
    Constant,
    /// `sqrt(2) cos(harmonic * pi * x[state])`
    Cos { state: usize, harmonic: u32 },
    /// `sqrt(2) sin(harmonic * pi * x[state])`
    Sin { state: usize, harmonic: u32 },
    /// `prod_j x[j]^exponents[j]`
    Monomial { exponents: Vec<u32> },
}

impl BasisFunction {
    fn value(&self, x: &[f64]) -> f64 {
        match self {
            BasisFunction::Constant => 1.0,
            BasisFunction::Cos { state, harmonic } => {
                SQRT_2 * (f64::from(*harmonic) * PI * x[*state]).cos()
            }
            BasisFunction::Sin { state, harmonic } => {
                SQRT_2 * (f64::from(*harmonic) * PI * x[*state]).sin()
            }
            BasisFunction::Monomial { exponents } => exponents
                .iter()
                .zip(x)
                .map(|(&e, &xi)| xi.powi(e as i32))
                .product(),
        }
    }

    fn gradient_into(&self, x: &[f64], row: &mut [f64]) {
        row.iter_mut().for_each(|r| *r = 0.0);
        match self {
            BasisFunction::Constant => {}
            BasisFunction::Cos { state, harmonic } => {
                let w = f64::from(*harmonic) * PI;
                row[*state] = -SQRT_2 * w * (w * x[*state]).sin();
            }
            BasisFunction::Sin { state, harmonic } => {
                let w = f64::from(*harmonic) * PI;
                row[*state] = SQRT_2 * w * (w * x[*state]).cos();
            }
            BasisFunction::Monomial { exponents } => {
                for (j, slot) in row.iter_mut().enumerate() {
                    let ej = exponents[j];
                    if ej == 0 {
                        continue;
                    }
                    let mut prod = f64::from(ej) * x[j].powi(ej as i32 - 1);
                    for (k, (&ek, &xk)) in exponents.iter().zip(x).enumerate() {
                        if k != j {
                            prod *= xk.powi(ek as i32);
                        }
                    }
                    *slot = prod;
                }
            }
        }
    }
}

/// Ordered dictionary of observables over `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    functions: Vec<BasisFunction>,
    state_dim: usize,
    includes_constant: bool,
}

impl BasisSet {
    pub fn new(functions: Vec<BasisFunction>, state_dim: usize) -> Result<Self> {
        if functions.len() <= state_dim {
            return Err(Error::Config(format!(
                "basis needs more functions than state dimensions (N = {}, n = {})",
                functions.len(),
                state_dim
            )));
        }
        for f in &functions {
            let ok = match f {
                BasisFunction::Constant => true,
                BasisFunction::Cos { state, harmonic } | BasisFunction::Sin { state, harmonic } => {
                    *state < state_dim && *harmonic > 0
                }
                BasisFunction::Monomial { exponents } => exponents.len() == state_dim,
            };
            if !ok {
                return Err(Error::Config(format!(
                    "basis function {f:?} is invalid for state dimension {state_dim}"
                )));
            }
        }
        let includes_constant = functions.first() == Some(&BasisFunction::Constant);
        Ok(Self {
            functions,
            state_dim,
            includes_constant,
        })
    }

    /// Number of observables `N`.
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// State dimension `n`.
    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn includes_constant(&self) -> bool {
        self.includes_constant
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn eval(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.functions.iter().map(|f| f.value(x)))
    }

    /// `N x n` Jacobian of `psi` at `x`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.state_dim;
        let mut jac = DMatrix::zeros(self.len(), n);
        let mut row = vec![0.0; n];
        for (i, f) in self.functions.iter().enumerate() {
            f.gradient_into(x, &mut row);
            for (j, &r) in row.iter().enumerate() {
                jac[(i, j)] = r;
            }
        }
        jac
    }
}

/// Sinusoid dictionary: optional constant, then for each state (in the given
/// order) and each harmonic (ascending), `sqrt(2) cos` followed by `sqrt(2) sin`.
pub fn make_sinusoid_basis(
    state_dim: usize,
    harmonics: &[u32],
    states: &[usize],
    include_constant: bool,
) -> Result<BasisSet> {
    if harmonics.is_empty() {
        return Err(Error::Config("sinusoid basis needs at least one harmonic".into()));
    }
    if states.is_empty() {
        return Err(Error::Config("sinusoid basis needs at least one state index".into()));
    }
    if let Some(&bad) = states.iter().find(|&&s| s >= state_dim) {
        return Err(Error::Config(format!(
            "state index {bad} out of range for state dimension {state_dim}"
        )));
    }
    if harmonics.contains(&0) {
        return Err(Error::Config("harmonic 0 duplicates the constant function".into()));
    }
    let mut sorted = harmonics.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut states_sorted = states.to_vec();
    states_sorted.sort_unstable();
    states_sorted.dedup();

    let mut functions = Vec::with_capacity(1 + 2 * sorted.len() * states_sorted.len());
    if include_constant {
        functions.push(BasisFunction::Constant);
    }
    for &state in &states_sorted {
        for &harmonic in &sorted {
            functions.push(BasisFunction::Cos { state, harmonic });
            functions.push(BasisFunction::Sin { state, harmonic });
        }
    }
    BasisSet::new(functions, state_dim)
}

/// The case-study dictionary over the planar double-integrator state
/// `(x, y, vx, vy)`.
pub fn make_paper_basis(harmonics: &[u32], states: &[usize], include_constant: bool) -> Result<BasisSet> {
    make_sinusoid_basis(4, harmonics, states, include_constant)
}

/// All monomials of total degree `1..=degree` in the selected states, ordered by
/// degree and then lexicographically by exponent vector (descending on the
/// first selected state). Degree 0 is the optional constant.
pub fn make_monomial_basis(
    state_dim: usize,
    states: &[usize],
    degree: u32,
    include_constant: bool,
) -> Result<BasisSet> {
    if degree == 0 {
        return Err(Error::Config("monomial degree must be at least 1".into()));
    }
    if states.is_empty() {
        return Err(Error::Config("monomial basis needs at least one state index".into()));
    }
    if let Some(&bad) = states.iter().find(|&&s| s >= state_dim) {
        return Err(Error::Config(format!(
            "state index {bad} out of range for state dimension {state_dim}"
        )));
    }
    let mut states_sorted = states.to_vec();
    states_sorted.sort_unstable();
    states_sorted.dedup();

    let mut functions = Vec::new();
    if include_constant {
        functions.push(BasisFunction::Constant);
    }
    for d in 1..=degree {
        let mut combos = Vec::new();
        compositions(d, states_sorted.len(), &mut Vec::new(), &mut combos);
        for combo in combos {
            let mut exponents = vec![0; state_dim];
            for (&s, &e) in states_sorted.iter().zip(&combo) {
                exponents[s] = e;
            }
            functions.push(BasisFunction::Monomial { exponents });
        }
    }
    BasisSet::new(functions, state_dim)
}

// Exponent vectors of length `parts` summing to `total`, first entry descending.
fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        let mut v = prefix.clone();
        v.push(total);
        out.push(v);
        return;
    }
    for first in (0..=total).rev() {
        prefix.push(first);
        compositions(total - first, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// Everything the identifier needs about one state: `psi`, its Jacobian, and
/// the Jacobian pseudoinverse.
#[derive(Debug, Clone)]
pub struct LiftedFrame {
    pub psi: DVector<f64>,
    pub jac: DMatrix<f64>,
    pub jac_pinv: DMatrix<f64>,
    pub sigma_min_jac: f64,
    pub sigma_max_jac: f64,
}

impl LiftedFrame {
    pub fn n_obs(&self) -> usize {
        self.psi.len()
    }

    pub fn state_dim(&self) -> usize {
        self.jac.ncols()
    }

    pub fn psi_norm(&self) -> f64 {
        self.psi.norm()
    }

    /// `sigma_max(W)` for `W = J^+ Psi(x)`; equals `|psi| / sigma_min(J)`.
    pub fn sigma_max_w(&self) -> f64 {
        self.psi_norm() / self.sigma_min_jac
    }

    /// Smallest nonzero singular value of `W = J^+ Psi(x)`.
    pub fn sigma_min_w(&self) -> f64 {
        self.psi_norm() / self.sigma_max_jac
    }
}

pub fn lift(basis: &BasisSet, x: &[f64]) -> Result<LiftedFrame> {
    if x.len() != basis.state_dim() {
        return Err(Error::dim("lift", basis.state_dim(), x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite state {x:?}")));
    }
    let psi = basis.eval(x);
    let jac = basis.jacobian(x);
    let svd = jac.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let sigma_min = svd.singular_values.min();
    let tolerance = RANK_TOLERANCE * sigma_max.max(f64::MIN_POSITIVE);
    if !(sigma_min > tolerance) {
        return Err(Error::DegenerateLifting {
            sigma: sigma_min,
            tolerance,
        });
    }
    // Full column rank: J^+ = V diag(1/s) U^T.
    let u = svd.u.expect("svd computed with u");
    let v_t = svd.v_t.expect("svd computed with v_t");
    let inv_s = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / s));
    let jac_pinv = v_t.transpose() * inv_s * u.transpose();
    Ok(LiftedFrame {
        psi,
        jac,
        jac_pinv,
        sigma_min_jac: sigma_min,
        sigma_max_jac: sigma_max,
    })
}

/// `Psi(x) lambda`, i.e. `L^T psi` for `lambda = vec(L)`.
pub fn psi_block_apply(psi: &[f64], lambda: &[f64]) -> Result<DVector<f64>> {
    let n = psi.len();
    if lambda.len() != n * n {
        return Err(Error::dim("psi_block_apply", n * n, lambda.len()));
    }
    Ok(DVector::from_iterator(
        n,
        lambda
            .chunks_exact(n)
            .map(|block| block.iter().zip(psi).map(|(l, p)| l * p).sum::<f64>()),
    ))
}

/// `Psi(x)^T v`: block `k` of the result is `v_k psi`.
pub fn psi_block_transpose_apply(psi: &[f64], v: &[f64]) -> Result<DVector<f64>> {
    let n = psi.len();
    if v.len() != n {
        return Err(Error::dim("psi_block_transpose_apply", n, v.len()));
    }
    let mut out = DVector::zeros(n * n);
    for (k, &vk) in v.iter().enumerate() {
        for (i, &p) in psi.iter().enumerate() {
            out[k * n + i] = vk * p;
        }
    }
    Ok(out)
}

/// Largest and smallest nonzero singular values of `Psi(x)`. Both equal
/// `|psi|`, since the rows of `Psi` are orthogonal with equal norm.
pub fn psi_singular_values(psi: &[f64]) -> (f64, f64) {
    let norm = psi.iter().map(|p| p * p).sum::<f64>().sqrt();
    (norm, norm)
}

/// Dense `N x N^2` block matrix. Only for diagnostics and tests.
pub fn materialize_psi(psi: &[f64]) -> DMatrix<f64> {
    let n = psi.len();
    let mut m = DMatrix::zeros(n, n * n);
    for k in 0..n {
        for (i, &p) in psi.iter().enumerate() {
            m[(k, k * n + i)] = p;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn central_jacobian(basis: &BasisSet, x: &[f64], h: f64) -> DMatrix<f64> {
        let n = x.len();
        let mut out = DMatrix::zeros(basis.len(), n);
        for j in 0..n {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] += h;
            xm[j] -= h;
            let col = (basis.eval(&xp) - basis.eval(&xm)) / (2.0 * h);
            out.set_column(j, &col);
        }
        out
    }

    #[test]
    fn case_study_basis_has_seventeen_functions_with_constant() {
        let b = make_paper_basis(&[1, 2], &[0, 1, 2, 3], true).unwrap();
        assert_eq!(b.len(), 17);
        assert!(b.includes_constant());
        let b16 = make_paper_basis(&[1, 2], &[0, 1, 2, 3], false).unwrap();
        assert_eq!(b16.len(), 16);
        assert_eq!(
            b.functions()[1..5],
            [
                BasisFunction::Cos { state: 0, harmonic: 1 },
                BasisFunction::Sin { state: 0, harmonic: 1 },
                BasisFunction::Cos { state: 0, harmonic: 2 },
                BasisFunction::Sin { state: 0, harmonic: 2 },
            ]
        );
    }

    #[test]
    fn case_study_basis_at_origin() {
        let b = make_paper_basis(&[1, 2], &[0, 1, 2, 3], true).unwrap();
        let psi = b.eval(&[0.0; 4]);
        assert_eq!(psi[0], 1.0);
        for k in 0..8 {
            assert_relative_eq!(psi[1 + 2 * k], SQRT_2);
            assert_eq!(psi[2 + 2 * k], 0.0);
        }
        assert_relative_eq!(psi.norm(), 17f64.sqrt(), epsilon = 1e-14);

        let jac = b.jacobian(&[0.0; 4]);
        for (row, f) in b.functions().iter().enumerate() {
            match f {
                BasisFunction::Cos { .. } | BasisFunction::Constant => {
                    assert!(jac.row(row).iter().all(|&v| v == 0.0))
                }
                BasisFunction::Sin { state, harmonic } => {
                    for col in 0..4 {
                        let want = if col == *state {
                            SQRT_2 * f64::from(*harmonic) * PI
                        } else {
                            0.0
                        };
                        assert_relative_eq!(jac[(row, col)], want, epsilon = 1e-14);
                    }
                }
                BasisFunction::Monomial { .. } => unreachable!(),
            }
        }
    }

    #[test]
    fn configuration_errors() {
        assert!(matches!(make_paper_basis(&[], &[0], true), Err(Error::Config(_))));
        assert!(matches!(make_paper_basis(&[1], &[4], true), Err(Error::Config(_))));
        assert!(matches!(make_paper_basis(&[1], &[0], false), Err(Error::Config(_))));
    }

    #[test]
    fn monomial_scalar_basis() {
        let b = make_monomial_basis(1, &[0], 2, true).unwrap();
        assert_eq!(b.len(), 3);
        let psi = b.eval(&[2.0]);
        assert_eq!(psi.as_slice(), &[1.0, 2.0, 4.0]);
        let jac = b.jacobian(&[2.0]);
        assert_eq!(jac.as_slice(), &[0.0, 1.0, 4.0]);
    }

    #[test]
    fn monomial_pinv_on_column_space() {
        let b = make_monomial_basis(1, &[0], 2, true).unwrap();
        let f = lift(&b, &[3.0]).unwrap();
        let y = DVector::from_vec(vec![0.0, 1.0, 6.0]);
        assert_relative_eq!((&f.jac_pinv * y)[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn monomial_two_state_ordering() {
        let b = make_monomial_basis(2, &[0, 1], 2, false).unwrap();
        let exps: Vec<Vec<u32>> = b
            .functions()
            .iter()
            .map(|f| match f {
                BasisFunction::Monomial { exponents } => exponents.clone(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(exps, vec![vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn pinv_is_left_inverse() {
        let b = make_paper_basis(&[1, 2], &[0, 1, 2, 3], true).unwrap();
        let f = lift(&b, &[0.3, -1.2, 2.2, 0.7]).unwrap();
        let id = &f.jac_pinv * &f.jac;
        assert!((id - DMatrix::<f64>::identity(4, 4)).abs().max() < 1e-8);
    }

    #[test]
    fn degenerate_lifting_is_reported() {
        // only x[0] appears, so the column for x[1] is identically zero
        let b = make_monomial_basis(2, &[0], 3, true).unwrap();
        match lift(&b, &[0.5, 0.5]) {
            Err(Error::DegenerateLifting { sigma, .. }) => assert_eq!(sigma, 0.0),
            other => panic!("expected degenerate lifting, got {other:?}"),
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let bases = [
            make_paper_basis(&[1, 2], &[0, 1, 2, 3], true).unwrap(),
            make_monomial_basis(4, &[0, 1, 2, 3], 3, true).unwrap(),
        ];
        for basis in &bases {
            for _ in 0..100 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let analytic = basis.jacobian(&x);
                let fd = central_jacobian(basis, &x, 1e-5);
                let scale = analytic.abs().max().max(1.0);
                assert!((analytic - fd).abs().max() <= 1e-6 * scale);
            }
        }
    }

    #[test]
    fn block_apply_examples() {
        let psi = [1.0, 3.0];
        // L = [[0,0],[0,-2]] stacked by columns
        let lambda = [0.0, 0.0, 0.0, -2.0];
        let out = psi_block_apply(&psi, &lambda).unwrap();
        assert_eq!(out.as_slice(), &[0.0, -6.0]);
        assert_eq!(psi_block_apply(&psi, &[0.0; 4]).unwrap().as_slice(), &[0.0, 0.0]);
        assert!(matches!(psi_block_apply(&psi, &[0.0; 3]), Err(Error::Dimension { .. })));
        assert!(matches!(
            psi_block_transpose_apply(&psi, &[0.0; 3]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn transpose_apply_unit_vector() {
        let psi = [0.5, -1.0, 2.0];
        let out = psi_block_transpose_apply(&psi, &[0.0, 1.0, 0.0]).unwrap();
        assert_eq!(&out.as_slice()[0..3], &[0.0; 3]);
        assert_eq!(&out.as_slice()[3..6], &psi);
        assert_eq!(&out.as_slice()[6..9], &[0.0; 3]);
    }

    #[test]
    fn singular_value_examples() {
        assert_eq!(psi_singular_values(&[1.0, 0.0, 0.0]), (1.0, 1.0));
        assert_eq!(psi_singular_values(&[3.0, 4.0]), (5.0, 5.0));
    }

    #[test]
    fn sigma_w_matches_dense_svd() {
        let b = make_paper_basis(&[1, 2], &[0, 1, 2, 3], true).unwrap();
        let f = lift(&b, &[0.4, 1.1, -0.3, 2.5]).unwrap();
        let w = &f.jac_pinv * materialize_psi(f.psi.as_slice());
        let sv = w.svd(false, false).singular_values;
        let nonzero: Vec<f64> = sv.iter().copied().filter(|&s| s > 1e-9).collect();
        let max = nonzero.iter().cloned().fold(f64::MIN, f64::max);
        let min = nonzero.iter().cloned().fold(f64::MAX, f64::min);
        assert_relative_eq!(max, f.sigma_max_w(), max_relative = 1e-10);
        assert_relative_eq!(min, f.sigma_min_w(), max_relative = 1e-10);
    }
}
