//! Quantum probability measures on finite outcome spaces.
//!
//! A measure is a POVM `ν` whose effects `h_j = ν({x_j})` sum to the identity
//! on `C^d`. Random variables assign a `d×d` matrix to each outcome. The crate
//! computes quantum expectations and operator variances, Naimark and
//! Stinespring dilations, semi-invariance and moment diagnostics, C*-convex
//! hull membership, and noise functionals of randomised measures.

pub mod dilation;
pub mod error;
pub mod expectation;
pub mod hulls;
pub mod io;
pub mod matkit;
pub mod noise;
pub mod qpm;
pub mod random;
pub mod variance;

pub use error::{Error, Result};
pub use matkit::{CMatrix, Frame};
pub use qpm::{DensityOperator, OutcomeSpace, Povm, QuantumRandomVariable};
