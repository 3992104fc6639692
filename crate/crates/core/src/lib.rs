//! Differential machine learning for option pricing.
//!
//! Small feedforward networks are trained on simulated payoffs plus
//! differential labels (deltas, gammas). The labels come from pathwise,
//! smoothed-pathwise, likelihood-ratio (LRM) or hybrid pathwise-LRM
//! estimators, and the crate ships the closed-form and quadrature oracles
//! needed to measure how well each choice recovers the true prices and
//! Greeks.

// `!(a > b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod labels;
pub mod market;
pub mod montecarlo;
pub mod network;
pub mod oracles;
pub mod payoffs;
pub mod rng;
pub mod selftest;

pub use error::{DmlError, Result};
