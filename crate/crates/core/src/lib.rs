//! Spectral computations for one-sided and extended CMV operators.
//!
//! The crate follows a single pipeline: Verblunsky coefficients ([`coeffs`])
//! drive both the five-diagonal operators ([`operator`]) and the Szegő transfer
//! cocycle ([`transfer`]). Carathéodory functions ([`caratheodory`]) and the
//! Green's function of the extended operator ([`spectral`]) turn these into
//! spectral measures and Hölder exponents, while [`tracemap`] handles the
//! Fibonacci substitution dynamics. [`verify`] bundles the end-to-end checks.

// `!(x < bound)` checks deliberately reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod caratheodory;
pub mod coeffs;
pub mod error;
pub mod operator;
pub mod spectral;
pub mod tracemap;
pub mod transfer;
pub mod verify;

pub use num_complex::Complex64;

pub use error::{CmvError, Result};

/// Shorthand used throughout the crate.
pub type C64 = Complex64;

#[cfg(test)]
#[inline]
pub(crate) fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{i theta}`.
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}
