//! Compositional-inversion laboratory.
//!
//! Synthesizes noisy observations from simplex-constrained inputs through
//! configurable linear and nonlinear forward systems, estimates the unknown
//! composition with pseudo-inverse, k-nearest-neighbor, and feedforward-network
//! estimators, and checks the results against closed-form error bounds and
//! Monte-Carlo verifiers.
//!
//! Modules map onto the pipeline stages:
//! - [`simplex`]: composition vectors, samplers, projection, and
//!   high-dimensional volume-concentration analytics.
//! - [`systems`]: the zoo of synthetic forward systems, noise injection, and
//!   paired dataset generation/persistence.
//! - [`linear`]: system-matrix MLE, SVD pseudo-inverse, oracle/benchmark
//!   estimators, and closed-form bounds.
//! - [`knn`]: inverse-distance-weighted k-nearest-neighbor estimator.
//! - [`mlp`]: from-scratch feedforward network with explicit backpropagation,
//!   batch normalization, and Adam.
//! - [`metrics`]: the error metrics and report building blocks.

pub mod error;
pub mod knn;
pub mod linear;
pub mod metrics;
pub mod mlp;
pub mod rng;
pub mod simplex;
pub mod systems;

pub use error::{Error, Result};
