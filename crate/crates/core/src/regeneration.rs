//! Essential hitting times and the restart procedure.
//!
//! `σ(x)` is built from the ladder `u_{k+1} = inf{t ≥ v_k : x ∈ ξ⁰_t}`,
//! `v_k = u_k + τ^x ∘ θ_{u_k}`, stopped at the first `k` where the restarted
//! process from `x` survives or `x` is never reached again. Survival of the
//! restarted process is read as "alive `progeny_window` time units later".

use serde::Serialize;

use crate::contact::{first_hit, survives, Configuration, Evolver};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::harris::HarrisSystem;
use crate::lattice::Site;
use crate::mc::sampling::{conditioned_sample, McConfig, Observation};
use crate::stats::{fisher_ci, pearson};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Censoring {
    None,
    /// The ladder needed information beyond the view horizon.
    Horizon,
    /// A run involved in the ladder touched the window boundary.
    Boundary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegenerationRecord {
    pub x: Site,
    /// `u_0, u_1, ...`; `f64::INFINITY` when `ξ⁰` died before reaching `x`.
    pub u: Vec<f64>,
    /// `v_0, v_1, ...`; `f64::INFINITY` when the restarted process survived.
    pub v: Vec<f64>,
    pub k: Option<usize>,
    pub sigma: Option<f64>,
    pub censored_reason: Censoring,
    /// `t(x)`, when observed.
    pub hitting_time: Option<f64>,
}

impl RegenerationRecord {
    /// `u_0 ≤ v_0 ≤ u_1 ≤ v_1 ≤ ...` over the recorded entries.
    pub fn is_interleaved(&self) -> bool {
        if self.u.first() != Some(&0.0) || self.v.first() != Some(&0.0) {
            return false;
        }
        let mut seq = Vec::new();
        for k in 0..self.u.len() {
            seq.push(self.u[k]);
            if let Some(&v) = self.v.get(k) {
                seq.push(v);
            }
        }
        seq.windows(2).all(|w| w[0] <= w[1])
    }
}

/// Runs the ladder for site `x` on the view `sys`.
pub fn essential_hitting(sys: &HarrisSystem, x: Site, progeny_window: f64) -> Result<RegenerationRecord> {
    if !(progeny_window > 0.0) {
        return Err(Error::InvalidArgument("progeny window must be positive".into()));
    }
    let t_max = sys.t_max();
    let mut rec = RegenerationRecord {
        x,
        u: vec![0.0],
        v: vec![0.0],
        k: None,
        sigma: None,
        censored_reason: Censoring::None,
        hitting_time: None,
    };
    if !sys.window().contains(x) {
        rec.censored_reason = Censoring::Boundary;
        return Ok(rec);
    }
    let mut xi0 = Evolver::new(sys, &Configuration::singleton(Site::ORIGIN))?;
    let last_start = t_max - progeny_window;
    let mut k = 0;
    loop {
        let vk = rec.v[k];
        // u_{k+1}
        let u_next = if vk > last_start {
            None
        } else {
            xi0.run_to(vk);
            if xi0.is_occupied(x) {
                Some(vk)
            } else {
                let mut found = None;
                while let Some(e) = xi0.step(last_start) {
                    if e.site == x && e.delta > 0 {
                        found = Some(e.time);
                        break;
                    }
                }
                found
            }
        };
        if xi0.contaminated() {
            rec.censored_reason = Censoring::Boundary;
            return Ok(rec);
        }
        let u = match u_next {
            Some(u) => u,
            None if xi0.count() == 0 => {
                rec.u.push(f64::INFINITY);
                rec.k = Some(k);
                rec.sigma = Some(rec.u[k]);
                return Ok(rec);
            }
            None => {
                rec.censored_reason = Censoring::Horizon;
                return Ok(rec);
            }
        };
        if k == 0 {
            rec.hitting_time = Some(u);
        }
        rec.u.push(u);
        // v_{k+1}
        let shifted = sys.time_shift(u)?;
        let run = survives(&shifted, &Configuration::singleton(x), progeny_window)?;
        if run.contaminated {
            rec.censored_reason = Censoring::Boundary;
            return Ok(rec);
        }
        k += 1;
        match run.extinct_at {
            Some(tau) => rec.v.push(u + tau),
            None => {
                rec.v.push(f64::INFINITY);
                rec.k = Some(k);
                rec.sigma = Some(u);
                return Ok(rec);
            }
        }
    }
}

/// `θ̃_x = T_x ∘ θ_{σ(x)}`.
pub fn theta_tilde(sys: &HarrisSystem, rec: &RegenerationRecord) -> Result<HarrisSystem> {
    let sigma = rec
        .sigma
        .ok_or_else(|| Error::InvalidArgument(format!("sigma({:?}) is censored", rec.x)))?;
    Ok(sys.time_shift(sigma)?.space_shift(rec.x))
}

/// First time `x` is occupied by `ξ⁰` with progeny alive at `horizon`;
/// differs from `σ(x)` in general.
pub fn first_immortal_occupancy(sys: &HarrisSystem, x: Site, horizon: f64) -> Result<Option<f64>> {
    let t = crate::contact::immortal_occupancy_intervals(sys, x, horizon)?;
    Ok(t.first().map(|&(a, _)| a))
}

/// One segment of a restart scheme: the stopping time (`None` for the
/// infinite step) and the two accumulated quantities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub duration: Option<f64>,
    pub g: f64,
    pub f: f64,
}

pub trait RestartDriver {
    /// Segment `k`, started at absolute time `start`.
    fn segment(&mut self, k: usize, start: f64) -> Result<Segment>;
}

impl<F: FnMut(usize, f64) -> Result<Segment>> RestartDriver for F {
    fn segment(&mut self, k: usize, start: f64) -> Result<Segment> {
        self(k, start)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RestartOutcome {
    pub k: usize,
    /// `T_0 = 0, T_1, ..., T_K`.
    pub times: Vec<f64>,
    /// `Σ_{k<K} G_k + F_K`; partial sum when censored.
    pub m: f64,
    pub censored: bool,
}

/// Iterates `T_{k+1} = T_k + T ∘ θ_{T_k}` until the infinite step,
/// accumulating `M`. Reaching `horizon` first gives a censored outcome.
pub fn restart<D: RestartDriver>(driver: &mut D, horizon: f64) -> Result<RestartOutcome> {
    let mut times = vec![0.0];
    let mut m = 0.0;
    let mut k = 0;
    loop {
        let start = times[k];
        let seg = driver.segment(k, start)?;
        match seg.duration {
            None => {
                m += seg.f;
                return Ok(RestartOutcome { k, times, m, censored: false });
            }
            Some(d) => {
                if !(d > 0.0) {
                    return Err(Error::InvalidArgument(format!("segment {k}: stopping time {d} not positive")));
                }
                m += seg.g;
                let next = start + d;
                if next > horizon {
                    return Ok(RestartOutcome { k, times, m, censored: true });
                }
                times.push(next);
                k += 1;
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub pairs: usize,
    /// `None` when one coordinate has zero variance.
    pub correlation: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub ci_level: f64,
    pub contains_zero: Option<bool>,
    pub acceptance_rate: f64,
    pub censored: usize,
    pub excluded: usize,
}

/// Pairs `(σ(x), σ(y) ∘ θ̃_x)` over survival-conditioned replicas, with a
/// Pearson correlation and its Fisher-z interval.
pub fn sigma_increment_independence_test(
    env: &Environment,
    x: Site,
    y: Site,
    cfg: &McConfig,
    ci_level: f64,
) -> Result<IndependenceReport> {
    let pw = cfg.progeny_window;
    let run = conditioned_sample(env, cfg, 0x5161, |sys| {
        let rx = essential_hitting(sys, x, pw)?;
        let Some(sx) = rx.sigma else { return Ok(censoring(rx.censored_reason)) };
        let shifted = theta_tilde(sys, &rx)?;
        let ry = essential_hitting(&shifted, y, pw)?;
        match ry.sigma {
            Some(sy) => Ok(Observation::Value((sx, sy))),
            None => Ok(censoring(ry.censored_reason)),
        }
    })?;
    let xs: Vec<f64> = run.values.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = run.values.iter().map(|p| p.1).collect();
    let correlation = pearson(&xs, &ys);
    let ci = correlation.map(|r| fisher_ci(r, xs.len(), ci_level));
    Ok(IndependenceReport {
        pairs: xs.len(),
        correlation,
        ci,
        ci_level,
        contains_zero: ci.map(|(lo, hi)| lo <= 0.0 && 0.0 <= hi),
        acceptance_rate: run.acceptance.value,
        censored: run.censored,
        excluded: run.excluded,
    })
}

fn censoring<T>(c: Censoring) -> Observation<T> {
    match c {
        Censoring::Boundary => Observation::Excluded,
        _ => Observation::Censored,
    }
}

/// `σ(x) ≥ t(x)` for a record with both observed.
pub fn sigma_dominates_hitting(rec: &RegenerationRecord) -> bool {
    match (rec.sigma, rec.hitting_time) {
        (Some(s), Some(t)) => s >= t,
        _ => true,
    }
}

/// `t(x)` straight from `ξ⁰`, for cross-checks.
pub fn hitting_time(sys: &HarrisSystem, x: Site) -> Result<Option<f64>> {
    Ok(first_hit(sys, &Configuration::singleton(Site::ORIGIN), x, sys.t_max())?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{sample_environment, EnvironmentSpec};
    use crate::harris::ClockId;
    use crate::lattice::{Edge, Window};

    fn env() -> Environment {
        sample_environment(&EnvironmentSpec::dirac(2.0, 1), &Window::new(10, 1.0).unwrap(), 0).unwrap()
    }

    fn s(v: i32) -> Site {
        Site::new(&[v])
    }

    #[test]
    fn origin_on_surviving_run() {
        // No clocks: the process from 0 never dies.
        let sys = HarrisSystem::from_streams(&env(), Window::new(3, 10.0).unwrap(), []).unwrap();
        let r = essential_hitting(&sys, Site::ORIGIN, 2.0).unwrap();
        assert_eq!(r.u, vec![0.0, 0.0]);
        assert_eq!(r.v, vec![0.0, f64::INFINITY]);
        assert_eq!((r.k, r.sigma), (Some(1), Some(0.0)));
        assert!(r.is_interleaved());
        let t = theta_tilde(&sys, &r).unwrap();
        assert_eq!(t.t_max(), sys.t_max());
    }

    /// Site 1 is infected at 0.5, its restarted process dies at 1.0, it is
    /// re-infected at 1.4 and then never dies.
    #[test]
    fn forced_two_step_ladder() {
        let sys = HarrisSystem::from_streams(
            &env(),
            Window::new(4, 10.0).unwrap(),
            [
                (ClockId::edge(Edge::new(s(0), 0)), vec![0.5, 1.4]),
                (ClockId::death(s(1)), vec![1.0]),
            ],
        )
        .unwrap();
        let r = essential_hitting(&sys, s(1), 3.0).unwrap();
        assert_eq!(r.u, vec![0.0, 0.5, 1.4]);
        assert_eq!(r.v, vec![0.0, 1.0, f64::INFINITY]);
        assert_eq!((r.k, r.sigma), (Some(2), Some(1.4)));
        assert_eq!(r.hitting_time, Some(0.5));
        assert!(r.is_interleaved() && sigma_dominates_hitting(&r));
    }

    #[test]
    fn never_hit_is_censored() {
        let sys = HarrisSystem::from_streams(&env(), Window::new(4, 10.0).unwrap(), []).unwrap();
        let r = essential_hitting(&sys, s(2), 3.0).unwrap();
        assert_eq!(r.censored_reason, Censoring::Horizon);
        assert_eq!(r.sigma, None);
        assert!(theta_tilde(&sys, &r).is_err());
    }

    #[test]
    fn restart_examples() {
        let mut inf = |_: usize, _: f64| Ok(Segment { duration: None, g: 5.0, f: 2.0 });
        let o = restart(&mut inf, 10.0).unwrap();
        assert_eq!((o.k, o.m, o.censored), (0, 2.0, false));
        let mut zero = |k: usize, _: f64| Ok(Segment { duration: if k < 3 { Some(1.0) } else { None }, g: 0.0, f: 0.0 });
        assert_eq!(restart(&mut zero, 10.0).unwrap().m, 0.0);
        let mut two = |k: usize, _: f64| {
            Ok(if k == 0 {
                Segment { duration: Some(1.0), g: 3.0, f: 100.0 }
            } else {
                Segment { duration: None, g: 100.0, f: 0.25 }
            })
        };
        let o = restart(&mut two, 10.0).unwrap();
        assert_eq!(o.k, 1);
        assert_eq!(o.times, vec![0.0, 1.0]);
        assert_eq!(o.m, 3.25);
        let mut forever = |_: usize, _: f64| Ok(Segment { duration: Some(1.0), g: 1.0, f: 0.0 });
        assert!(restart(&mut forever, 5.5).unwrap().censored);
    }

    #[test]
    fn ladder_as_restart() {
        let e = env();
        for seed in 0..40 {
            let sys = HarrisSystem::new(&e, Window::new(40, 30.0).unwrap(), seed);
            let r = essential_hitting(&sys, s(2), 5.0).unwrap();
            let Some(k) = r.k else { continue };
            let u = r.u.clone();
            let mut drv = |i: usize, _: f64| {
                Ok(if i < k {
                    Segment { duration: Some(u[i + 1] - u[i]).filter(|d| *d > 0.0).or(Some(f64::MIN_POSITIVE)), g: u[i + 1] - u[i], f: 0.0 }
                } else {
                    Segment { duration: None, g: 0.0, f: 0.0 }
                })
            };
            let o = restart(&mut drv, f64::INFINITY).unwrap();
            assert_eq!(o.k, k);
            assert!((o.m - r.sigma.unwrap()).abs() < 1e-9);
        }
    }
}
