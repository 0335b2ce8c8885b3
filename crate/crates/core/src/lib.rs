//! Pseudo-spectral laboratory for the quadratic Schrödinger system
//!
//! ```text
//! i u_t + Δu  = -2 v ū
//! i v_t + ½Δv = -u²
//! ```
//!
//! on a periodic box: time stepping, conserved quantities, symmetry transforms, ground
//! states, the negative-eigenvalue non-scattering criterion and empirical threshold scans.

// `!(x > 0.0)` is used on purpose so NaN parameters are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod grid;
pub mod groundstate;
pub mod observables;
pub mod spectral_criterion;
pub mod symmetry;
pub mod threshold;

pub use error::{Error, Result};
pub use grid::{make_grid, Field, Grid};
