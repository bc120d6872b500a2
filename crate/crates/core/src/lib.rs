//! Numerical toolkit for free stochastic analysis on Wigner space.
//!
//! The crate evaluates joint moments of multiple Wigner integrals, computes
//! free Stein discrepancies and the quantitative bounds that follow from
//! them, and runs two experiments: Breuer–Major rates for fractional
//! Brownian increments and Monte Carlo checks against GUE ensembles.
//!
//! Kernels are step functions on a uniform grid, so every integral below is
//! an exact finite sum rather than a quadrature.

pub mod breuer_major;
pub mod cmatrix;
mod error;
pub mod kernel_tensor;
pub mod nc_combinatorics;
pub mod nc_poly;
pub mod quad;
pub mod randmat_mc;
pub mod spd;
pub mod stein_bounds;
pub mod verify;
pub mod wigner_moments;

pub use error::{Error, Result};
pub use num_complex::Complex64;
