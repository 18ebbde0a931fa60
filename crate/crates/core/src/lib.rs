//! Estimation and small-sample corrected hypothesis tests for symmetric and
//! log-symmetric linear regression models.
//!
//! The model is `y = Xβ + φε` with ε drawn from a standardised symmetric law
//! (normal, Student-t, logistic, power exponential, ...). Parameters are fitted
//! by Fisher scoring; the Wald, likelihood ratio, score and gradient
//! statistics for `H₀: β₁ = β₁₀` are reported alongside a Bartlett-corrected
//! likelihood ratio and Bartlett-type corrected score and gradient statistics.

pub mod bootstrap;
pub mod design;
pub mod distribution;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod quadrature;
pub mod rng;
pub mod simulation;

pub use error::{Error, Result};
