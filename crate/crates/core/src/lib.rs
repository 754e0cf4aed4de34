//! Fixed-time identification of an additive disturbance through an adaptive
//! Koopman-generator estimate, with a time-explicit error bound feeding robust
//! control-barrier-function quadratic programs.
//!
//! Modules, bottom-up:
//! - [`observables`]: basis dictionaries and the lifted frame with its block matrix `Psi(x)`.
//! - [`fxt_id`]: adaptation law, reconstruction, error bound, batch baseline.
//! - [`safety`]: obstacle barriers and constraint rows per regime.
//! - [`qp`]: small dense active-set QP.
//! - [`control`]: nominal tracking law wrapped by the safety filter.
//! - [`plant`]: double integrator in wind with noisy measurements.
//! - [`harness`]: configured simulation runs with their logs and plots.

// Negated comparisons on floats are deliberate: they reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod fxt_id;
pub mod harness;
pub mod observables;
pub mod plant;
pub mod qp;
pub mod safety;

pub use error::{Error, Result};
