//! Integrating-factor pseudospectral solver for Schrödinger-type equations.
//!
//! The linear kinetic term is absorbed exactly by an integrating factor in
//! Fourier space and the remaining potential term is advanced with an
//! embedded Runge–Kutta pair under PI step-size control. Because adding a
//! constant `C` to the potential only rotates the global phase of `ψ`, the
//! solver picks a gauge constant at every step that shrinks the integrated
//! right-hand side, which lets the controller take larger steps. The phase
//! introduced this way is recorded in a [`gauge::GaugeLedger`] and removed
//! before output.
//!
//! Modules:
//! - [`spectral`]: periodic grids, FFTs, spectral derivatives and norms.
//! - [`potential`]: nonlinear Schrödinger and Schrödinger–Newton potentials.
//! - [`gauge`]: gauge-constant strategies and the phase ledger.
//! - [`integrator`]: Butcher tableaus, embedded steps, error norm, PI control.
//! - [`harness`]: configuration, drivers, scans, benchmarks and file output.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod gauge;
pub mod harness;
pub mod integrator;
pub mod potential;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64;
