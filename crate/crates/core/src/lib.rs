//! Generalized least-square-error (GLSE) precoding for massive MIMO downlinks.
//!
//! - [`rmt`]: channel ensembles, Gram spectra and R-/Stieltjes transforms.
//! - [`penalties`]: penalty and support model, scalar decoupled precoders, prox.
//! - [`replica`]: RS and one-step RSB fixed points, tuning, bounds, baselines.
//! - [`finite`]: finite-size solvers, oracles and antenna selection.
//! - [`harness`]: sweeps, Monte Carlo, curve fits, CSV and config I/O.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod finite;
pub mod harness;
pub mod penalties;
pub mod quad;
pub mod replica;
pub mod rmt;

pub use error::{Error, Result};
pub use num_complex::Complex64;
