//! Simulation and analysis of fractional stochastic heat equations driven by
//! Riesz-correlated Gaussian noise, and of the macroscopic fractal geometry of
//! their tall peaks.
//!
//! * [`kernels`]: stable densities, Riesz kernel, spectral density, constants.
//! * [`gaussian_field`]: exact and block-independent samplers for the linear solution.
//! * [`pam`]: parabolic Anderson model on a torus, localized Picard iterates,
//!   Feynman-Kac moments.
//! * [`fractal`]: shells, cube covers, dimension fits, skeletons, tail fits.
//! * [`harness`]: configured experiments, run records and the validation suite.

pub mod error;
pub mod fractal;
pub mod gaussian_field;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod pam;
pub mod par;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use kernels::ModelParams;
