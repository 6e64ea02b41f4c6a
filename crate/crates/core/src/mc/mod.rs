//! Survival-conditioned Monte Carlo estimators.

pub mod legendre;
pub mod pilot;
pub mod rates;
pub mod sampling;
pub mod section5;
pub mod shape;
pub mod tails;

pub use sampling::{conditioned_sample, estimate_mu, Conditioned, McConfig, MuEstimate, Observation};
