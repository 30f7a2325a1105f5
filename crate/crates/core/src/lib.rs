//! Generalized ridge shrinkage estimators for multivariate linear
//! regression, the closed-form model selection criteria built on them, and
//! a Monte Carlo harness for verifying their risk properties.
//!
//! The crate is organized along the pipeline:
//!
//! - [`linmodel`] — the observation pair, candidate models, and the
//!   coordinate transformation producing sufficient statistics;
//! - [`estimators`] — maximum likelihood and generalized ridge estimators
//!   with the risk-minimizing shrinkage weights;
//! - [`criteria`] — MCp, ZMCp, AIC, AICc, ZKLIC and the argmin selection
//!   rule over a candidate family;
//! - [`risk`] — exact per-replication losses, the closed-form predictive
//!   log-density, noncentrality diagnostics, and Monte Carlo estimation;
//! - [`simulation`] — scenario files, data generation, and the experiment
//!   drivers for selected-model risk and true-model selection probability.

pub mod criteria;
pub mod error;
pub mod estimators;
pub mod linmodel;
pub mod risk;
pub mod simulation;

pub use error::{Error, Result};
