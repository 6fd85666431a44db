//! Numerics for sublinear (G-)expectations under volatility uncertainty.
//!
//! * [`gcore`]: volatility bands and the generating function `G`.
//! * [`gheat`]: monotone explicit solver for the G-heat equation and
//!   (conditional) G-expectations.
//! * [`scenario`]: admissible volatility controls, G-Brownian scenarios,
//!   Euler integration of G-SDEs and upper-expectation estimates.
//! * [`functional`]: additive functionals `A^{f,g}` along scenarios.
//! * [`pathcheck`]: PDE-system residuals, pathwise path-independence checks,
//!   convergence order, the `δₙ` norm and the decomposition harness.
//! * [`harmonic`]: closed-form path-independent data built from harmonic
//!   functions of `h ∂ₓ + ½σ² ∂ₓ²`.
//! * [`exprdsl`]: the coefficient expression language used by configs.

// Range checks are written `!(a < b)` on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exprdsl;
pub mod functional;
pub mod gcore;
pub mod gheat;
pub mod harmonic;
pub mod linalg;
pub mod par;
pub mod pathcheck;
pub mod rng;
pub mod scenario;

pub use error::{Error, Result};
pub use gcore::{AscentOptions, GValue, VolatilityBand};
pub use linalg::SymMatrix;
