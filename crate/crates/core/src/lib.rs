//! Local legal labor markets under bankruptcy demand shocks.
//!
//! The crate is organised around the pipeline used to study how forum
//! shopping of large Chapter 11 cases drains legal-services demand from a
//! firm's home county:
//!
//! - [`model`]: closed-form household supply, CES demand, equilibrium and
//!   the forum-shopping demand channel (two parameterisations).
//! - [`panel`]: synthetic county-year panels and their CSV format.
//! - [`fe`]: two-way fixed-effects OLS with county-clustered inference,
//!   placebo lags and Poisson pseudo-ML.
//! - [`gmm`]: the two-step clustered simultaneous-equations GMM estimator.
//! - [`welfare`]: consumption-equivalent variation and lost-gains accounting.
//! - [`config`]: the flat `key = value` run-configuration format.

pub mod config;
pub mod error;
pub mod fe;
pub mod gmm;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod panel;
pub mod stats;
pub mod welfare;

pub use error::{Error, Result};
