//! Derivative-free saddle point optimization.
//!
//! The solver in [`saddle`] drives two approximate minimizers from [`oracle`]
//! toward a min-max saddle point with an adaptive learning rate. [`problems`]
//! holds the benchmark functions, [`theory`] the convergence-rate bounds for
//! strongly convex-concave problems, and [`baselines`] the comparison methods.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod numerics;
pub mod oracle;
pub mod problems;
pub mod saddle;
pub mod theory;
pub mod baselines;
pub mod config;
pub mod experiment;

pub use error::{Error, Result};
pub use numerics::{Matrix, Rng, Vector};
pub use saddle::{adapt_and_run, SaddleOptimizer, SaddlePair, SolverConfig};
