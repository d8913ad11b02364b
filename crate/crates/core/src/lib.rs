//! Spectral Galerkin discretization and implicit Runge-Kutta time integration
//! of semilinear evolution equations `dU/dt = A U + B(U)` on the periodic unit
//! interval, where `A` is normal and diagonal (or 2x2 block-diagonal) in
//! Fourier space.
//!
//! The crate is organized bottom-up:
//!
//! - [`tableau`]: Butcher tableaus, order conditions, stability function and
//!   A-stability certificates.
//! - [`spectral`]: mode grids, coefficient states, `A`, `e^{tA}`, projectors
//!   and scale norms.
//! - [`equations`]: the semilinear wave and nonlinear Schrodinger problems.
//! - [`integrator`]: the fixed-point stage iteration, reference solutions and
//!   independent oracles.
//! - [`analysis`]: convergence studies and order fitting.

pub mod analysis;
pub mod equations;
mod error;
pub mod integrator;
mod linalg;
pub mod spectral;
pub mod tableau;

pub use error::{Error, Result};
