//! Laplace approximations for linear inverse problems with exponential-family
//! observations, together with computable total-variation certificates.
//!
//! The forward operator is `R f = g` where `a g′ + b g = f`, `g(0) = 0`. Its
//! singular system feeds a truncated-series model, the posterior mode is found
//! by Newton's method, and the Gaussian approximation around it is certified
//! through an explicit bound on the total-variation error.

pub mod certification;
pub mod concentration;
pub mod eigensolver;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod operators;
pub mod model;
pub mod poly;
pub mod posterior;
pub mod rng;
pub mod stats;
pub mod validation;

pub use error::{Error, Result};
