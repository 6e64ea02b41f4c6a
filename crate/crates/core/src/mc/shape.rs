//! Shape snapshots: the chain
//! `(1-ε)A ⊂ (K̃'_t ∩ G̃_t)/t ⊂ G̃_t/t ⊂ H̃_t/t ⊂ (1+ε)A`
//! with `A = {μ̂ ≤ 1}` and `Z̃ = Z + [0,1]^d`, checked on lattice cells.

use serde::Serialize;

use super::sampling::{conditioned_sample, McConfig, MuProfile, Observation};
use crate::contact::{snapshots, SetSnapshots};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::lattice::{cube, Site};
use crate::stats::{binomial, Estimate};

pub const CONTAINMENTS: [&str; 4] = ["inner_ball", "coupled_in_essential", "essential_in_hit", "outer_ball"];

/// Point of the cell `z + [0,1]^d` closest to the origin in every coordinate.
fn nearest_corner(z: Site, d: usize) -> Vec<f64> {
    z.coords(d).iter().map(|&c| if c >= 0 { c as f64 } else { (c + 1) as f64 }).collect()
}

/// Largest value of `profile` on the cell `z + [0,1]^d`, attained at a corner.
fn cell_max(profile: &MuProfile, z: Site, d: usize) -> f64 {
    let c = z.coords(d);
    (0..1usize << d)
        .map(|mask| {
            let p: Vec<f64> = (0..d).map(|i| (c[i] + ((mask >> i) & 1) as i32) as f64).collect();
            profile.eval(&p)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The four containments at one time; `None` when censored.
pub fn containments(snap: &SetSnapshots, profile: &MuProfile, eps: f64, radius: u32, d: usize) -> [Option<bool>; 4] {
    let t = snap.t;
    // Inner: every cell meeting (1-ε)tA must belong to K'_t ∩ G_t.
    let inner_r = (1.0 - eps) * t;
    let reach = if profile.axis > 0.0 { (inner_r / profile.axis).ceil() as i64 + 1 } else { i64::MAX };
    let inner = if reach > radius as i64 {
        None
    } else {
        let mut ok = Some(true);
        for z in cube(d, Site::ORIGIN, reach as i32) {
            if profile.eval(&nearest_corner(z, d)) > inner_r || (snap.coupled.contains(z) && snap.essential.contains(z)) {
                continue;
            }
            // A hit site missing from G_t may be one whose σ was censored.
            if snap.coupled.contains(z) && snap.hit.contains(z) && snap.essential_censored > 0 {
                ok = None;
            } else {
                ok = Some(false);
                break;
            }
        }
        ok
    };
    let coupled_in_essential = Some(true);
    let essential_in_hit = Some(snap.essential.is_subset(&snap.hit));
    let outer_r = (1.0 + eps) * t;
    let outer = Some(snap.hit.sites().iter().all(|&z| cell_max(profile, z, d) <= outer_r));
    [inner, coupled_in_essential, essential_in_hit, outer]
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeRow {
    pub t: f64,
    /// Frequency per containment, in the order of [`CONTAINMENTS`].
    pub frequencies: [Estimate; 4],
}

pub const SALT_SHAPE: u32 = 0x5A;

pub fn shape_report(env: &Environment, ts: &[f64], eps: f64, profile: &MuProfile, cfg: &McConfig) -> Result<Vec<ShapeRow>> {
    let limit = cfg.t_max - cfg.progeny_window;
    if ts.iter().any(|&t| !(t > 0.0 && t <= limit)) {
        return Err(Error::InvalidArgument(format!("shape times must lie in (0, {limit}]")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} outside (0, 1)")));
    }
    let d = env.dim();
    let radius = cfg.window().radius;
    let run = conditioned_sample(env, cfg, SALT_SHAPE, |sys| {
        let mut out = Vec::with_capacity(ts.len());
        for &t in ts {
            let snap = snapshots(sys, t, cfg.progeny_window)?;
            if snap.contaminated {
                return Ok(Observation::Excluded);
            }
            out.push(containments(&snap, profile, eps, radius, d));
        }
        Ok(Observation::Value(out))
    })?;
    Ok(ts
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let frequencies = std::array::from_fn(|c| {
                let decided: Vec<bool> = run.values.iter().filter_map(|v| v[j][c]).collect();
                let hits = decided.iter().filter(|&&b| b).count();
                let (p, se) = binomial(hits, decided.len());
                Estimate {
                    value: p,
                    se,
                    ci_level: cfg.ci_level,
                    n: decided.len(),
                    censored: run.values.len() - decided.len(),
                    excluded: run.excluded,
                }
            });
            ShapeRow { t, frequencies }
        })
        .collect())
}
