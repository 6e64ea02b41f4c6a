//! Empirical rate functions `ĝₙ(u)/n = -(1/n)·log P̂(σ(nx) ≤ nu)` and
//! `ĥₙ(θ)/n = -(1/n)·log Ê[exp(-θ·σ(nx))]`, and their `n → ∞` limits.
//!
//! The additive constant (a log survival probability) is dropped; it
//! contributes a bias of order `1/n`.

use serde::Serialize;

use super::sampling::{Conditioned, SigmaSample};
use crate::error::{Error, Result};
use crate::lattice::Site;
use crate::stats::{mean_se, wls, Estimate};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateKind {
    Psi,
    K,
}

impl RateKind {
    pub fn arg_name(self) -> &'static str {
        match self {
            RateKind::Psi => "u",
            RateKind::K => "theta",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateCell {
    pub n: u32,
    pub arg: f64,
    /// Point estimate, or the lower bound when `one_sided`.
    pub value: f64,
    pub se: f64,
    /// Runs in the event (Ψ) or runs used (K).
    pub hits: usize,
    /// Runs where the event was decidable.
    pub used: usize,
    pub censored: usize,
    pub excluded: usize,
    /// Zero count: `value = (1/n)·log(used + 1)` bounds the rate from below.
    pub one_sided: bool,
}

impl RateCell {
    pub fn is_point(&self) -> bool {
        !self.one_sided && self.value.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RateFunctionTable {
    pub x: Site,
    pub kind: RateKind,
    pub n_list: Vec<u32>,
    pub grid: Vec<f64>,
    /// `cells[i][j]` for `n_list[i]` and `grid[j]`.
    pub cells: Vec<Vec<RateCell>>,
    /// Limit in `n` per grid point; NaN when no point cell exists.
    pub limit: Vec<Estimate>,
}

pub const LIMIT_METHOD: &str = "weighted fit of value = a + b/n over point cells, limit a";

impl RateFunctionTable {
    pub fn row(&self, n: u32) -> Option<&[RateCell]> {
        self.n_list.iter().position(|&m| m == n).map(|i| self.cells[i].as_slice())
    }

    pub fn limit_values(&self) -> Vec<f64> {
        self.limit.iter().map(|e| e.value).collect()
    }
}

/// `ĝₙ(u)/n` from raw samples of `σ(nx)`.
pub fn psi_cell(samples: &[SigmaSample], n: u32, u: f64, excluded: usize) -> RateCell {
    let nf = f64::from(n);
    let mut hits = 0;
    let mut used = 0;
    for s in samples {
        if let Some(b) = s.sigma_at_most(nf * u) {
            used += 1;
            hits += b as usize;
        }
    }
    let censored = samples.len() - used;
    let base = RateCell { n, arg: u, value: f64::NAN, se: f64::NAN, hits, used, censored, excluded, one_sided: false };
    if used == 0 {
        return RateCell { one_sided: true, ..base };
    }
    if hits == 0 {
        return RateCell { value: ((used + 1) as f64).ln() / nf, se: 0.0, one_sided: true, ..base };
    }
    let p = hits as f64 / used as f64;
    RateCell { value: -p.ln() / nf, se: ((1.0 - p) / (p * used as f64)).sqrt() / nf, ..base }
}

/// `ĥₙ(θ)/n` from raw samples; unobserved `σ` are dropped.
pub fn k_cell(samples: &[SigmaSample], n: u32, theta: f64, excluded: usize) -> RateCell {
    let nf = f64::from(n);
    let sig: Vec<f64> = samples.iter().filter_map(|s| s.sigma).collect();
    let censored = samples.len() - sig.len();
    let base = RateCell { n, arg: theta, value: f64::NAN, se: f64::NAN, hits: sig.len(), used: sig.len(), censored, excluded, one_sided: false };
    if sig.is_empty() {
        return RateCell { one_sided: true, ..base };
    }
    // Factor out the minimum so large θ does not underflow.
    let m = sig.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = sig.iter().map(|s| (-theta * (s - m)).exp()).collect();
    let (wm, wse) = mean_se(&w);
    RateCell { value: (theta * m - wm.ln()) / nf, se: wse / (wm * nf), ..base }
}

fn extrapolate(cells: &[RateCell], ci_level: f64) -> Estimate {
    let pts: Vec<&RateCell> = cells.iter().filter(|c| c.is_point()).collect();
    let nan = Estimate { ci_level, ..Estimate::new(f64::NAN, f64::NAN, 0) };
    match pts.len() {
        0 => nan,
        1 => Estimate { ci_level, ..Estimate::new(pts[0].value, pts[0].se, pts[0].used) },
        _ => {
            let xs: Vec<f64> = pts.iter().map(|c| 1.0 / f64::from(c.n)).collect();
            let ys: Vec<f64> = pts.iter().map(|c| c.value).collect();
            // Cells with zero spread get the resolution of their sample.
            let ses: Vec<f64> = pts.iter().map(|c| c.se.max(1.0 / (f64::from(c.n) * (c.used + 1) as f64))).collect();
            let used = pts.iter().map(|c| c.used).sum();
            match wls(&xs, &ys, &ses) {
                Some(f) => Estimate { ci_level, ..Estimate::new(f.intercept, f.intercept_se, used) },
                None => nan,
            }
        }
    }
}

fn build(
    x: Site,
    kind: RateKind,
    blocks: &[(u32, Conditioned<SigmaSample>)],
    grid: &[f64],
    ci_level: f64,
) -> Result<RateFunctionTable> {
    let cells: Vec<Vec<RateCell>> = blocks
        .iter()
        .map(|(n, run)| {
            grid.iter()
                .map(|&a| match kind {
                    RateKind::Psi => psi_cell(&run.values, *n, a, run.excluded),
                    RateKind::K => k_cell(&run.values, *n, a, run.excluded),
                })
                .collect()
        })
        .collect();
    if !cells.iter().flatten().any(RateCell::is_point) {
        return Err(Error::InsufficientData(format!("every {kind:?} cell for x = {x:?} is a zero count")));
    }
    let limit = (0..grid.len())
        .map(|j| extrapolate(&cells.iter().map(|row| row[j]).collect::<Vec<_>>(), ci_level))
        .collect();
    Ok(RateFunctionTable { x, kind, n_list: blocks.iter().map(|b| b.0).collect(), grid: grid.to_vec(), cells, limit })
}

/// Table of `ĝₙ(u)/n` on one replica block per `n`.
pub fn rate_table_psi(x: Site, blocks: &[(u32, Conditioned<SigmaSample>)], u_grid: &[f64], ci_level: f64) -> Result<RateFunctionTable> {
    build(x, RateKind::Psi, blocks, u_grid, ci_level)
}

/// Table of `ĥₙ(θ)/n` on one replica block per `n`.
pub fn rate_table_k(x: Site, blocks: &[(u32, Conditioned<SigmaSample>)], theta_grid: &[f64], ci_level: f64) -> Result<RateFunctionTable> {
    build(x, RateKind::K, blocks, theta_grid, ci_level)
}

/// Gap between the chord and the value at each interior grid point,
/// `w₊·f(a₊) + w₋·f(a₋) - f(a)`, with its SE under independence. A convex
/// function has every gap ≥ 0.
pub fn convexity_gaps(grid: &[f64], values: &[f64], ses: &[f64]) -> Vec<(f64, f64)> {
    (1..grid.len().saturating_sub(1))
        .map(|i| {
            let (hm, hp) = (grid[i] - grid[i - 1], grid[i + 1] - grid[i]);
            let (wp, wm) = (hm / (hm + hp), hp / (hm + hp));
            let gap = wp * values[i + 1] + wm * values[i - 1] - values[i];
            let se = (wp * wp * ses[i + 1] * ses[i + 1] + wm * wm * ses[i - 1] * ses[i - 1] + ses[i] * ses[i]).sqrt();
            (gap, se)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(sigma: f64) -> SigmaSample {
        SigmaSample { hit: Some(sigma), sigma: Some(sigma), limit: 100.0 }
    }

    fn block(n: u32, sig: &[f64]) -> (u32, Conditioned<SigmaSample>) {
        let values: Vec<SigmaSample> = sig.iter().map(|&s| sample(s)).collect();
        let c = Conditioned {
            tried: values.len(),
            survived: values.len(),
            values,
            censored: 0,
            excluded: 0,
            acceptance: Estimate::exact(1.0),
        };
        (n, c)
    }

    #[test]
    fn psi_cell_counts() {
        let s: Vec<SigmaSample> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| sample(v)).collect();
        let c = psi_cell(&s, 2, 1.0, 0);
        assert_eq!((c.hits, c.used), (2, 4));
        assert!((c.value - 0.5f64.ln() / -2.0).abs() < 1e-15);
        let z = psi_cell(&s, 2, 0.1, 0);
        assert!(z.one_sided);
        assert_eq!(z.value, 5f64.ln() / 2.0);
        let one = psi_cell(&s, 2, 10.0, 0);
        assert_eq!((one.value, one.se), (0.0, 0.0));
    }

    #[test]
    fn censored_sigma_settled_by_hit() {
        let s = [SigmaSample { hit: Some(5.0), sigma: None, limit: 10.0 }];
        assert_eq!(psi_cell(&s, 1, 4.0, 0).used, 1);
        assert_eq!(psi_cell(&s, 1, 6.0, 0).used, 0);
    }

    #[test]
    fn k_cell_limits() {
        let s: Vec<SigmaSample> = [3.0, 5.0, 8.0].iter().map(|&v| sample(v)).collect();
        assert_eq!(k_cell(&s, 1, 0.0, 0).value, 0.0);
        let big = k_cell(&s, 2, 500.0, 0);
        assert!((big.value / 500.0 - 1.5).abs() < 3f64.ln() / 1000.0 + 1e-12);
        let mut prev = f64::NEG_INFINITY;
        for th in [0.0, 0.1, 0.5, 1.0, 5.0] {
            let v = k_cell(&s, 2, th, 0).value;
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn all_zero_counts_is_insufficient() {
        let b = [block(2, &[5.0, 6.0])];
        assert!(matches!(rate_table_psi(Site::ORIGIN, &b, &[0.1, 0.2], 0.95), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn exact_inverse_n_limit() {
        // value_n = 0.4 + 1/n on frozen cells.
        let cells: Vec<RateCell> = [2u32, 4, 8]
            .iter()
            .map(|&n| RateCell {
                n,
                arg: 0.0,
                value: 0.4 + 1.0 / f64::from(n),
                se: 0.01,
                hits: 1,
                used: 10,
                censored: 0,
                excluded: 0,
                one_sided: false,
            })
            .collect();
        let e = extrapolate(&cells, 0.95);
        assert!((e.value - 0.4).abs() < 1e-12);
    }

    #[test]
    fn convexity_of_parabola() {
        let g = [0.0, 0.5, 1.5, 2.0];
        let v: Vec<f64> = g.iter().map(|u| u * u).collect();
        let gaps = convexity_gaps(&g, &v, &[0.0; 4]);
        assert_eq!(gaps.len(), 2);
        assert!(gaps.iter().all(|&(d, _)| d > 0.0));
        let lin: Vec<f64> = g.iter().map(|u| 3.0 - u).collect();
        assert!(convexity_gaps(&g, &lin, &[0.0; 4]).iter().all(|&(d, _)| d.abs() < 1e-15));
    }
}
