//! Numerical machinery for the arithmetic Gordon criterion on one-dimensional
//! quasiperiodic Schrödinger operators
//!
//! ```text
//! (H(x)ψ)(n) = ψ(n+1) + ψ(n-1) + f(x + nα) ψ(n)
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and is organized bottom-up:
//!
//! - [`contfrac`]: exact continued fractions, convergents, the Liouville rate
//!   `β(α) = limsup log(q_{k+1}) / q_k`, synthesis of Liouville frequencies and
//!   certified circle-rotation phases.
//! - [`periodic`]: 1-periodic extended-real functions with piecewise-monotone
//!   structure; clamping, exact and refined total variation, semi-bounded
//!   variation, quadrature with logarithmic singularities, finite-difference
//!   exceedance measures.
//! - [`discrepancy`]: exact star discrepancy, rotation orbits, Koksma checks and
//!   the punctured grids `R_s`.
//! - [`cocycle`]: log-scaled matrix products, Schrödinger cocycles and their
//!   `F·G` factorization, Lyapunov exponents and the uniform upper bound for
//!   cocycles of bounded variation.
//! - [`gordon`]: repetition defects, telescopic margins, the telescoping
//!   identities, gap norms, the no-decay witness and the assembled verdict.
//! - [`spectrum`]: finite-box truncations, Sturm bisection, inverse iteration
//!   and regime scans.
//!
//! High-precision work goes through [`mp::Mp`]; everything that only needs
//! double precision is generic over [`scalar::Scalar`] and runs on `f64`.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cocycle;
pub mod contfrac;
pub mod discrepancy;
pub mod error;
pub mod gordon;
pub mod mp;
pub mod periodic;
pub mod scalar;
pub mod spectrum;

mod quadrature;
mod rational;

pub use error::{Error, Result};
