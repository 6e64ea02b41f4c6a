//! Closed-form lower bound on `P(t(x) ∈ [s, t]·‖x‖₁)` and its Monte Carlo
//! counterpart.
//!
//! One step to a neighbour `u` inside `[s, t]` is forced by: the origin dies
//! in `((s+t)/2, t)`, the bond `{0, u}` first opens in `(s, (s+t)/2)`, the
//! `4d - 2` other bonds at `0` or `u` stay closed on `[0, t]` and `u` does
//! not die on `[0, t]`. The strong Markov property chains `‖x‖₁` steps.

use rayon::prelude::*;
use serde::Serialize;

use crate::contact::{first_hit, Configuration};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::harris::HarrisSystem;
use crate::lattice::{Site, Window};
use crate::rng::replica_seed;
use crate::stats::{binomial, Estimate};

/// `γ` of the one-step bound, `-log` of the product of the five factors.
pub fn gamma(d: usize, lambda_min: f64, lambda_max: f64, s: f64, t: f64) -> Result<f64> {
    if !(0.0 < s && s < t) {
        return Err(Error::InvalidArgument(format!("need 0 < s < t, got s = {s}, t = {t}")));
    }
    if !(0.0 < lambda_min && lambda_min <= lambda_max) {
        return Err(Error::InvalidArgument(format!("need 0 < lambda_min <= lambda_max, got {lambda_min}, {lambda_max}")));
    }
    let death_window = (-(s + t) / 2.0).exp() - (-t).exp();
    let opening = (-lambda_max * s).exp() * (1.0 - (-lambda_min * (t - s) / 2.0).exp());
    let log_p = death_window.ln() + opening.ln() - t - (4 * d - 2) as f64 * lambda_max * t;
    Ok(-log_p)
}

/// `exp(-γ·‖x‖₁)`.
pub fn section5_bound(d: usize, lambda_min: f64, lambda_max: f64, s: f64, t: f64, x: Site) -> Result<f64> {
    let g = gamma(d, lambda_min, lambda_max, s, t)?;
    Ok((-g * x.norm1() as f64).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpeedRow {
    pub x: Site,
    pub bound: f64,
    pub estimate: Estimate,
    /// `estimate + 3·SE ≥ bound`.
    pub consistent: bool,
}

pub const SALT_SPEED: u32 = 0x55;

/// Unconditioned frequency of `t(x) ∈ [s‖x‖₁, t‖x‖₁]` over `replicas`
/// systems on a window just large enough for the time range.
pub fn speed_probability(
    env: &Environment,
    x: Site,
    s: f64,
    t: f64,
    replicas: usize,
    base_seed: u64,
    growth: f64,
    margin: u32,
) -> Result<Estimate> {
    let k = x.norm1() as f64;
    if k == 0.0 {
        return Ok(Estimate::exact(1.0));
    }
    let t_hi = t * k;
    let window = Window::new((growth * t_hi).ceil() as u32 + margin + x.norm_inf() as u32, t_hi)?;
    let salt = SALT_SPEED.wrapping_mul(31).wrapping_add(x.norm1() as u32);
    let rows: Vec<Result<(bool, bool)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let sys = HarrisSystem::new(env, window, replica_seed(base_seed, salt, i));
            let (hit, contaminated) = first_hit(&sys, &Configuration::singleton(Site::ORIGIN), x, t_hi)?;
            Ok((hit.is_some_and(|h| h >= s * k), contaminated))
        })
        .collect();
    let (mut hits, mut excluded) = (0, 0);
    for r in rows {
        let (h, c) = r?;
        hits += h as usize;
        excluded += c as usize;
    }
    let (p, se) = binomial(hits, replicas);
    Ok(Estimate { excluded, ..Estimate::new(p, se, replicas) })
}
