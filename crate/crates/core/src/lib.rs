//! Positive false discovery rate estimation with Dirichlet-process mixtures
//! of decreasing beta densities.
//!
//! The p-value density is modeled as `f(x) = π + (1 - π) h(x)` where `h` is a
//! mixture of `be(a, b)` densities with `a <= 1 <= b`. The crate provides the
//! p-value density transforms for common tests, the mixture functionals
//! (`π(F)`, pFDR), a posterior sampler and a simulation harness that checks
//! posterior concentration as the number of hypotheses grows.
//!
//! Runnable walkthroughs live in `crates/core/examples/`.

pub mod cli;
pub mod dp_mcmc;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod mixture_core;
pub mod pvalue_models;
pub mod special;

pub use error::{Error, Result};
