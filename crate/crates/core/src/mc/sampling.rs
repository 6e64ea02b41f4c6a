//! Replica plumbing: configuration, seed derivation and rejection sampling
//! on survival of the process from the origin.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contact::{survives, Configuration};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::harris::HarrisSystem;
use crate::lattice::{Site, Window};
use crate::regeneration::{essential_hitting, Censoring};
use crate::rng::replica_seed;
use crate::stats::{binomial, mean_se, Estimate};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub replicas: usize,
    pub base_seed: u64,
    pub t_max: f64,
    /// Runs dying before this time are rejected.
    pub survival_horizon: f64,
    /// A restarted process alive this long counts as surviving.
    pub progeny_window: f64,
    /// Absolute horizon for the infinite-progeny measure.
    pub progeny_horizon: f64,
    /// Growth constant `M̂` of the window policy.
    pub growth: f64,
    pub margin: u32,
    pub u_grid: Vec<f64>,
    /// Read `u_grid` in units of `μ̂`.
    pub u_relative: bool,
    pub theta_grid: Vec<f64>,
    pub n_list: Vec<u32>,
    pub eps_list: Vec<f64>,
    pub ci_level: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            replicas: 1000,
            base_seed: 1,
            t_max: 60.0,
            survival_horizon: 20.0,
            progeny_window: 10.0,
            progeny_horizon: 60.0,
            growth: 2.5,
            margin: 5,
            u_grid: vec![0.5, 0.75, 1.0, 1.25],
            u_relative: true,
            theta_grid: vec![0.0, 0.25, 0.5, 1.0, 2.0],
            n_list: vec![4, 8, 12],
            eps_list: vec![0.3],
            ci_level: 0.95,
        }
    }
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] < w[1])
}

impl McConfig {
    /// `R = ⌈M̂·t_max⌉ + margin`.
    pub fn window(&self) -> Window {
        let r = (self.growth * self.t_max).ceil() as u32 + self.margin;
        Window { radius: r.max(1), t_max: self.t_max }
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.replicas < 1 {
            v.push("replicas must be at least 1".into());
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            v.push(format!("t_max must be positive, got {}", self.t_max));
        }
        for (name, h) in [("survival_horizon", self.survival_horizon), ("progeny_horizon", self.progeny_horizon)] {
            if !(h > 0.0 && h <= self.t_max) {
                v.push(format!("{name} = {h} must lie in (0, t_max]"));
            }
        }
        if !(self.progeny_window > 0.0 && self.progeny_window < self.t_max) {
            v.push(format!("progeny_window = {} must lie in (0, t_max)", self.progeny_window));
        }
        if self.progeny_window > self.survival_horizon {
            v.push("progeny_window must not exceed survival_horizon".into());
        }
        if !(self.growth > 0.0) {
            v.push("growth must be positive".into());
        }
        if !strictly_increasing(&self.u_grid) {
            v.push("u_grid must be strictly increasing".into());
        }
        if !strictly_increasing(&self.theta_grid) || self.theta_grid.iter().any(|&t| t < 0.0) {
            v.push("theta_grid must be strictly increasing and nonnegative".into());
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) || self.n_list.contains(&0) {
            v.push("n_list must be strictly increasing and positive".into());
        }
        if !strictly_increasing(&self.eps_list) || self.eps_list.iter().any(|&e| e <= 0.0) {
            v.push("eps_list must be strictly increasing and positive".into());
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            v.push(format!("ci_level = {} outside (0, 1)", self.ci_level));
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(v.join("; ")))
        }
    }

    /// The system of replica `i` in stream `salt`.
    pub fn system(&self, env: &Environment, salt: u32, i: u64) -> HarrisSystem {
        HarrisSystem::new(env, self.window(), replica_seed(self.base_seed, salt, i))
    }
}

/// What a statistic reports for one surviving replica.
#[derive(Clone, Debug, PartialEq)]
pub enum Observation<T> {
    Value(T),
    Censored,
    Excluded,
}

#[derive(Clone, Debug)]
pub struct Conditioned<T> {
    /// Statistic values of accepted replicas, in replica order.
    pub values: Vec<T>,
    pub tried: usize,
    pub survived: usize,
    pub censored: usize,
    pub excluded: usize,
    /// Survival frequency, an estimate of `P(τ⁰ > T_surv)`.
    pub acceptance: Estimate,
}

enum Row<T> {
    Rejected,
    Obs(Observation<T>),
}

/// Rejection sampling on `τ⁰ > T_surv`, then `stat` on each survivor.
/// Replica `i` uses the seed derived from `(base_seed, salt, i)`, and results
/// are gathered in replica order, so the output does not depend on the
/// number of worker threads.
pub fn conditioned_sample<T, F>(env: &Environment, cfg: &McConfig, salt: u32, stat: F) -> Result<Conditioned<T>>
where
    T: Send,
    F: Fn(&HarrisSystem) -> Result<Observation<T>> + Sync,
{
    cfg.validate()?;
    let rows: Vec<Result<Row<T>>> = (0..cfg.replicas as u64)
        .into_par_iter()
        .map(|i| {
            let sys = cfg.system(env, salt, i);
            let s = survives(&sys, &Configuration::singleton(Site::ORIGIN), cfg.survival_horizon)?;
            if !s.alive {
                return Ok(Row::Rejected);
            }
            if s.contaminated {
                return Ok(Row::Obs(Observation::Excluded));
            }
            Ok(Row::Obs(stat(&sys)?))
        })
        .collect();
    let mut out = Conditioned {
        values: Vec::new(),
        tried: cfg.replicas,
        survived: 0,
        censored: 0,
        excluded: 0,
        acceptance: Estimate::exact(0.0),
    };
    for r in rows {
        match r? {
            Row::Rejected => {}
            Row::Obs(o) => {
                out.survived += 1;
                match o {
                    Observation::Value(v) => out.values.push(v),
                    Observation::Censored => out.censored += 1,
                    Observation::Excluded => out.excluded += 1,
                }
            }
        }
    }
    let (p, se) = binomial(out.survived, out.tried);
    out.acceptance = Estimate { ci_level: cfg.ci_level, ..Estimate::new(p, se, out.tried) };
    if out.survived == 0 {
        return Err(Error::InsufficientData(format!(
            "no replica out of {} survived to {}",
            cfg.replicas, cfg.survival_horizon
        )));
    }
    Ok(out)
}

/// `t(z)` and `σ(z)` of one replica; `None` when not observed before
/// `limit = t_max - progeny_window`. An unobserved `t(z)` exceeds `limit`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaSample {
    pub hit: Option<f64>,
    pub sigma: Option<f64>,
    pub limit: f64,
}

impl SigmaSample {
    /// `Some(t(z) ≥ s)` when decidable.
    pub fn hit_at_least(&self, s: f64) -> Option<bool> {
        match self.hit {
            Some(t) => Some(t >= s),
            None if self.limit >= s => Some(true),
            None => None,
        }
    }

    /// `Some(t(z) ≤ s)` when decidable.
    pub fn hit_at_most(&self, s: f64) -> Option<bool> {
        match self.hit {
            Some(t) => Some(t <= s),
            None if self.limit >= s => Some(false),
            None => None,
        }
    }

    /// `Some(σ(z) ≤ s)` when decidable; `σ ≥ t` settles some censored runs.
    pub fn sigma_at_most(&self, s: f64) -> Option<bool> {
        match (self.sigma, self.hit) {
            (Some(v), _) => Some(v <= s),
            (None, Some(t)) if t > s => Some(false),
            (None, None) if self.limit >= s => Some(false),
            _ => None,
        }
    }
}

/// Survival-conditioned samples of `(t(z), σ(z))`. Runs that pass the
/// survival horizon but die later are excluded: they are failures of the
/// finite-horizon survival proxy.
pub fn sigma_samples(env: &Environment, z: Site, cfg: &McConfig, salt: u32) -> Result<Conditioned<SigmaSample>> {
    let pw = cfg.progeny_window;
    let limit = cfg.t_max - pw;
    conditioned_sample(env, cfg, salt, |sys| {
        let r = essential_hitting(sys, z, pw)?;
        if r.censored_reason == Censoring::Boundary || r.u.last() == Some(&f64::INFINITY) {
            return Ok(Observation::Excluded);
        }
        Ok(Observation::Value(SigmaSample { hit: r.hitting_time, sigma: r.sigma, limit }))
    })
}

/// One replica block per `n`, for the site `n·x`.
pub fn sigma_blocks(env: &Environment, x: Site, n_list: &[u32], cfg: &McConfig) -> Result<Vec<(u32, Conditioned<SigmaSample>)>> {
    n_list
        .iter()
        .map(|&n| Ok((n, sigma_samples(env, x.scaled(n as i32), cfg, block_salt(SALT_SIGMA, n))?)))
        .collect()
}

/// Salt of the replica block used for site `n·x`; distinct `n` get
/// independent blocks.
pub fn block_salt(base: u32, n: u32) -> u32 {
    base.wrapping_mul(1_000_003).wrapping_add(n)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MuEstimate {
    pub x: Site,
    /// `(n, mean of σ(nx)/n)` per `n`.
    pub rows: Vec<(u32, Estimate)>,
    /// Value at the largest `n`.
    pub mu: Estimate,
}

pub const SALT_SIGMA: u32 = 0x51;

/// `μ̂_n(x)` over survivors for each `n`, on independent replica blocks.
pub fn estimate_mu(env: &Environment, x: Site, n_list: &[u32], cfg: &McConfig) -> Result<MuEstimate> {
    mu_from_blocks(x, &sigma_blocks(env, x, n_list, cfg)?, cfg.ci_level)
}

pub fn mu_from_blocks(x: Site, blocks: &[(u32, Conditioned<SigmaSample>)], ci_level: f64) -> Result<MuEstimate> {
    let mut rows = Vec::new();
    for (n, run) in blocks {
        rows.push((*n, mu_row(run, *n, ci_level)?));
    }
    let mu = rows.last().map(|r| r.1).ok_or_else(|| Error::InvalidArgument("empty n list".into()))?;
    Ok(MuEstimate { x, rows, mu })
}

/// Mean of `σ/n` over the samples with observed `σ`.
pub fn mu_row(run: &Conditioned<SigmaSample>, n: u32, ci_level: f64) -> Result<Estimate> {
    let vals: Vec<f64> = run.values.iter().filter_map(|s| s.sigma).map(|s| s / f64::from(n)).collect();
    if vals.is_empty() {
        return Err(Error::InsufficientData(format!("no observed sigma at n = {n}")));
    }
    let censored = run.censored + run.values.len() - vals.len();
    let (m, se) = mean_se(&vals);
    Ok(Estimate { value: m, se, ci_level, n: vals.len(), censored, excluded: run.excluded })
}

/// `μ̂(z) = a·‖z‖∞ + b·(‖z‖₁ − ‖z‖∞)` from the axis value `a = μ̂(e₁)` and
/// the diagonal value `μ̂(e₁ + e₂) = a + b`; exact along axes and diagonals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MuProfile {
    pub axis: f64,
    pub diagonal_excess: f64,
}

impl MuProfile {
    pub const METHOD: &'static str = "axis-diagonal interpolation a*|z|_inf + b*(|z|_1 - |z|_inf)";

    pub fn from_axis(axis: f64) -> MuProfile {
        MuProfile { axis, diagonal_excess: axis }
    }

    pub fn from_axis_diagonal(axis: f64, diagonal: f64) -> MuProfile {
        MuProfile { axis, diagonal_excess: diagonal - axis }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let inf = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let one: f64 = z.iter().map(|v| v.abs()).sum();
        self.axis * inf + self.diagonal_excess * (one - inf)
    }
}
