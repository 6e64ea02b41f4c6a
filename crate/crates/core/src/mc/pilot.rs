//! Small pilot runs that fix constants used by the main experiments.
//! Every pilot uses its own replica salts, independent of the main runs.

use serde::Serialize;

use super::sampling::{block_salt, conditioned_sample, mu_row, sigma_samples, McConfig, Observation};
use super::tails::progeny_measure_samples;
use crate::contact::{evolve, Configuration};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::stats::{mean_se, Estimate};

const SALT_PILOT_GROWTH: u32 = 0x9101;
const SALT_PILOT_MU: u32 = 0x9102;
const SALT_PILOT_PROGENY: u32 = 0x9103;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PilotSummary {
    /// Largest `max_{z ∈ H_t} ‖z‖∞ / t` seen over survivors.
    pub growth: f64,
    pub mu_e1: Estimate,
    pub theta_frac: Option<f64>,
}

/// Largest observed spread rate `max ‖z‖∞ / t` of `H_t` over survivors.
pub fn pilot_growth(env: &Environment, t: f64, cfg: &McConfig) -> Result<f64> {
    let run = conditioned_sample(env, cfg, SALT_PILOT_GROWTH, |sys| {
        let tr = evolve(sys, &Configuration::singleton(Site::ORIGIN), t)?;
        if tr.boundary_contaminated {
            return Ok(Observation::Excluded);
        }
        let reach = tr.ever_occupied(t).sites().iter().map(|z| z.norm_inf()).max().unwrap_or(0);
        Ok(Observation::Value(reach as f64 / t))
    })?;
    if run.excluded > 0 {
        return Err(Error::InsufficientData(format!("{} pilot runs reached the window boundary", run.excluded)));
    }
    Ok(run.values.iter().copied().fold(0.0, f64::max))
}

/// `μ̂(x)` from a single pilot block at `n`.
pub fn pilot_mu(env: &Environment, x: Site, n: u32, cfg: &McConfig) -> Result<Estimate> {
    let run = sigma_samples(env, x.scaled(n as i32), cfg, block_salt(SALT_PILOT_MU, n))?;
    mu_row(&run, n, cfg.ci_level)
}

/// `fraction` times the mean of `measure/t` at time `t`.
pub fn pilot_theta_frac(env: &Environment, x: Site, t: f64, fraction: f64, cfg: &McConfig) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument("pilot time must be positive".into()));
    }
    let run = progeny_measure_samples(env, x, &[t], cfg, SALT_PILOT_PROGENY)?;
    let ratios: Vec<f64> = run.values.iter().map(|m| m[0] / t).collect();
    let (m, _) = mean_se(&ratios);
    if !m.is_finite() {
        return Err(Error::InsufficientData("no usable pilot progeny measure".into()));
    }
    Ok(fraction * m)
}
