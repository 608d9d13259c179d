//! Sparse model selection by cross-validated risk and stochastic stepwise search.
//!
//! The pipeline is:
//!
//! 1. [`data`] loads a covariate matrix and response and builds a repeated
//!    cross-validation [`data::FoldPlan`].
//! 2. [`cv_risk`] scores a candidate covariate subset by the mean held-out
//!    [`divergence`] of an [`estimators`] fit.
//! 3. [`search`] grows candidate models one dimension at a time, sampling new
//!    covariates preferentially from those that appeared in the best models of
//!    the previous dimension.
//! 4. [`dimension`] picks the working dimension by sequential testing and keeps
//!    the models that are statistically indistinguishable from the best one.
//! 5. [`network`] turns the retained models into a co-occurrence network and
//!    provides equally weighted model-averaged predictions.
//!
//! [`bench`] generates synthetic data with a planted sparse truth, and [`cli`]
//! wires everything into the `paradigm` command-line tool.

pub mod bench;
pub mod cli;
pub mod cv_risk;
pub mod data;
pub mod dimension;
pub mod divergence;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod model;
pub mod network;
pub mod rng;
pub mod search;

pub use error::{Error, Result};
pub use model::ModelIndexSet;
