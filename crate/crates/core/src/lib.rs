//! Numerical core of `crackfield`: an adaptive Q1 finite-element solver for
//! pressurized quasi-static phase-field fracture.
//!
//! The crate is `no_std` (it needs `alloc` only) and performs no I/O. It is
//! organised bottom-up:
//!
//! * [`mesh`]: 2:1-balanced quad/hex forest over `(-K, K)^d`.
//! * [`fem`]: Q1 shape functions, quadrature, degrees of freedom and affine
//!   constraints (hanging nodes, Dirichlet rows, active-set rows).
//! * [`linsolve`]: CSR matrices, restarted GMRES, smoothed-aggregation AMG and
//!   the block-diagonal preconditioner for the 2x2 Newton system.
//! * [`model`]: material law, residual and exact Jacobian of the pressurized
//!   phase-field equations, time extrapolation and the initial crack.
//! * [`solver`]: the combined Newton / primal-dual active set iteration with
//!   cycle detection.
//! * [`adapt`]: crack-band refinement plus a displacement gradient-jump
//!   estimator, and the adaptive solve/refine loop.
//! * [`functionals`]: total crack volume and crack opening profiles.
//! * [`reference`]: closed-form Sneddon values, Richardson extrapolation and
//!   rate fitting.

#![no_std]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod adapt;
pub mod error;
pub mod fem;
pub mod functionals;
pub mod linsolve;
pub mod mesh;
pub mod model;
pub mod reference;
pub mod solver;

pub use error::{Error, Result};
