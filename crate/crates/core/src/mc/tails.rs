//! Exponential tail fits: `log P̂(event at scale s)` against `s`.

use serde::Serialize;

use super::sampling::{conditioned_sample, Conditioned, McConfig, Observation, SigmaSample};
use crate::contact::infinite_progeny_measures_dual;
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::stats::{binomial, wls, z_two_sided, LineFit};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// `t(nx) ≥ (1 + ε)·μ·n`
    Up,
    /// `t(nx) ≤ (1 - ε)·μ·n`
    Down,
}

/// One scale point of a tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailCell {
    pub scale: f64,
    pub hits: usize,
    pub used: usize,
    pub censored: usize,
    pub excluded: usize,
    pub p: f64,
    pub p_se: f64,
    /// `log p̂`, or the upper bound `log(1/(used+1))` when `one_sided`.
    pub log_p: f64,
    pub log_se: f64,
    pub one_sided: bool,
}

impl TailCell {
    pub fn from_counts(scale: f64, hits: usize, used: usize, censored: usize, excluded: usize) -> TailCell {
        let (p, p_se) = binomial(hits, used);
        let mut c = TailCell { scale, hits, used, censored, excluded, p, p_se, log_p: f64::NAN, log_se: f64::NAN, one_sided: false };
        if used == 0 {
            c.one_sided = true;
        } else if hits == 0 {
            c.one_sided = true;
            c.log_p = -((used + 1) as f64).ln();
            c.log_se = 0.0;
        } else {
            c.log_p = p.ln();
            c.log_se = ((1.0 - p) / (p * used as f64)).sqrt();
        }
        c
    }

    pub fn is_point(&self) -> bool {
        !self.one_sided && self.log_p.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    /// Inflated by `sqrt(χ²/dof)` when the points scatter more than their SEs.
    pub slope_se: f64,
    pub slope_ci: (f64, f64),
    pub r2: f64,
    pub residuals: Vec<f64>,
    pub points: usize,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub ses: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub cells: Vec<TailCell>,
    pub fit: Option<TailFit>,
    pub skipped: Option<String>,
}

impl TailReport {
    pub fn one_sided_count(&self) -> usize {
        self.cells.iter().filter(|c| c.one_sided).count()
    }

    /// The report's fit, or insufficient-data with the skip reason.
    pub fn require_fit(&self) -> Result<&TailFit> {
        self.fit
            .as_ref()
            .ok_or_else(|| Error::InsufficientData(self.skipped.clone().unwrap_or_else(|| "no fit".into())))
    }
}

/// Weighted line through `(x, y ± se)`; `None` for fewer than 3 points.
pub fn fit_line(xs: &[f64], ys: &[f64], ses: &[f64], ci_level: f64) -> Option<TailFit> {
    if xs.len() < 3 {
        return None;
    }
    // Exact points carry no weight information; fall back to equal weights.
    let w: Vec<f64> = if ses.iter().all(|&s| s > 0.0) { ses.to_vec() } else { vec![1.0; xs.len()] };
    let f: LineFit = wls(xs, ys, &w)?;
    let chi2: f64 = f.residuals.iter().zip(&w).map(|(r, s)| (r / s) * (r / s)).sum();
    let scale = (chi2 / (xs.len() - 2) as f64).sqrt();
    let slope_se = if ses.iter().all(|&s| s > 0.0) { f.slope_se * scale.max(1.0) } else { f.slope_se * scale };
    let h = z_two_sided(ci_level) * slope_se;
    Some(TailFit {
        slope: f.slope,
        intercept: f.intercept,
        slope_se,
        slope_ci: (f.slope - h, f.slope + h),
        r2: f.r2,
        residuals: f.residuals,
        points: xs.len(),
        xs: xs.to_vec(),
        ys: ys.to_vec(),
        ses: ses.to_vec(),
    })
}

/// Fits `log p̂` against scale over the point cells.
pub fn fit_cells(cells: Vec<TailCell>, ci_level: f64) -> TailReport {
    let pts: Vec<&TailCell> = cells.iter().filter(|c| c.is_point()).collect();
    let xs: Vec<f64> = pts.iter().map(|c| c.scale).collect();
    let ys: Vec<f64> = pts.iter().map(|c| c.log_p).collect();
    let ses: Vec<f64> = pts.iter().map(|c| c.log_se).collect();
    let fit = fit_line(&xs, &ys, &ses, ci_level);
    let skipped = match (&fit, pts.len()) {
        (Some(_), _) => None,
        (None, k) if k < 3 => Some(format!("{k} usable point(s), {} one-sided; need 3", cells.len() - k)),
        (None, _) => Some("degenerate scales".into()),
    };
    TailReport { cells, fit, skipped }
}

/// Deviation cells of `t(nx)` from `μ·n`, on one replica block per `n`.
pub fn deviation_cells(blocks: &[(u32, Conditioned<SigmaSample>)], dir: Direction, eps: f64, mu: f64) -> Vec<TailCell> {
    blocks
        .iter()
        .map(|(n, run)| {
            let nf = f64::from(*n);
            let (mut hits, mut used) = (0, 0);
            for s in &run.values {
                let ev = match dir {
                    Direction::Up => s.hit_at_least((1.0 + eps) * mu * nf),
                    Direction::Down => s.hit_at_most((1.0 - eps) * mu * nf),
                };
                if let Some(b) = ev {
                    used += 1;
                    hits += b as usize;
                }
            }
            TailCell::from_counts(nf, hits, used, run.censored + run.values.len() - used, run.excluded)
        })
        .collect()
}

pub fn deviation_tail(
    blocks: &[(u32, Conditioned<SigmaSample>)],
    dir: Direction,
    eps: f64,
    mu: f64,
    ci_level: f64,
) -> Result<TailReport> {
    if !(eps > 0.0) || (dir == Direction::Down && eps >= 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} out of range for {dir:?}")));
    }
    Ok(fit_cells(deviation_cells(blocks, dir, eps, mu), ci_level))
}

pub const SALT_PROGENY: u32 = 0x7A11;

/// Per surviving replica, the infinite-progeny measure of `x` on `[0, t]`
/// for every `t` in `ts`.
pub fn progeny_measure_samples(env: &Environment, x: Site, ts: &[f64], cfg: &McConfig, salt: u32) -> Result<Conditioned<Vec<f64>>> {
    let horizon = cfg.progeny_horizon;
    if ts.iter().any(|&t| !(t >= 0.0 && t < horizon)) {
        return Err(Error::InvalidArgument(format!("every t must lie in [0, {horizon})")));
    }
    conditioned_sample(env, cfg, salt, |sys| {
        let m = infinite_progeny_measures_dual(sys, x, ts, horizon)?;
        if m.iter().any(|p| p.contaminated) {
            return Ok(Observation::Excluded);
        }
        Ok(Observation::Value(m.iter().map(|p| p.measure).collect()))
    })
}

/// Frequencies of `{measure ≤ θ_frac·t}` per `t` and their log-linear fit.
pub fn progeny_tail_from_samples(run: &Conditioned<Vec<f64>>, ts: &[f64], theta_frac: f64, ci_level: f64) -> TailReport {
    let cells = ts
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let hits = run.values.iter().filter(|m| m[j] <= theta_frac * t).count();
            TailCell::from_counts(t, hits, run.values.len(), run.censored, run.excluded)
        })
        .collect();
    fit_cells(cells, ci_level)
}

pub fn progeny_measure_tail(env: &Environment, x: Site, ts: &[f64], theta_frac: f64, cfg: &McConfig) -> Result<TailReport> {
    let run = progeny_measure_samples(env, x, ts, cfg, SALT_PROGENY)?;
    Ok(progeny_tail_from_samples(&run, ts, theta_frac, cfg.ci_level))
}
