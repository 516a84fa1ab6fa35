//! Cluster-weighted mixtures of log-normal accelerated failure time models
//! for right-censored competing-risks data.
//!
//! Each mixture component corresponds to one cause of failure and models the
//! joint density of covariates and log failure time as
//! `pi_g * N_d(x | mu_g, Sigma_g) * N(y | b0_g + b_g'x, sigma2_g)`.
//! Censored subjects have unknown cause and contribute a survival-weighted
//! mixture term. Parameters are estimated by EM with closed-form updates
//! ([`em::fit`]); standard errors come from a stratified bootstrap
//! ([`bootstrap::bootstrap_se`]).

pub mod bootstrap;
pub mod curves;
pub mod em;
pub mod error;
pub mod model;
pub mod numerics;
pub mod selection;
pub mod sim;

pub use error::{Error, Result};
pub use model::{ComponentParams, Dataset, MixtureModel, Status, SurvivalRecord};
