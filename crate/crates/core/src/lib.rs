//! Spectral Galerkin simulation of the stochastic power-law fluid on the
//! periodic torus `T^d`, together with the statistical checks that confront
//! the simulated Galerkin SDE with its exact energy and uniqueness identities.
//!
//! Module map:
//!
//! * [`spectral`] — divergence-free Fourier basis, fields, transforms, norms.
//! * [`constitutive`] — rate of strain, power-law stress, convection, drift.
//! * [`exponents`] — closed-form critical exponents and admissibility tests.
//! * [`noise`] — diagonal Q-Wiener covariance spectra and increment sampling.
//! * [`integrator`] — time stepping and trajectory simulation.
//! * [`diagnostics`] — ensemble energy balance, a priori bounds, Gronwall envelope.
//! * [`cli`] — configuration files, run manifests and subcommand dispatch.

// `!(x < y)` is deliberate where NaN must fall through to the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod cli;
pub mod constitutive;
pub mod diagnostics;
pub mod error;
pub mod exponents;
pub mod integrator;
pub mod noise;
pub mod spectral;

pub use error::{Error, Result};
