//! Bayesian spline regression with non-linear functional shrinkage.
//!
//! A cubic B-spline fit is given a horseshoe-type prior that shrinks it
//! toward the local linearization of one or more parametric families
//! (Hill, power). The crate contains the sampler, five comparison fitters,
//! a reproducible simulation harness and posterior diagnostics.

// `!(v > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod basis;
pub mod chain;
pub mod data;
pub mod diagnostics;
pub mod distributions;
pub mod error;
pub mod io;
mod linalg;
pub mod mcmc;
pub mod sampler;
pub mod simulation;
pub mod spaces;

pub use basis::{KnotVector, SplineBasis};
pub use chain::ChainDraws;
pub use data::{Dataset, Rescaling};
pub use error::{Error, Result};
pub use sampler::{run_nlfs, NlfsConfig, Shrinkage};
pub use spaces::{FunctionSpace, Projection, SpaceKind};
