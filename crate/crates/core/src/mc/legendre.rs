//! Discrete Legendre transforms between `Ψ` and `K`:
//! `Ψ(u) = sup_θ {K(θ) - θu}` and `K(θ) = inf_u {Ψ(u) + θu}` over finite grids.

use serde::Serialize;

use super::rates::{RateFunctionTable, RateKind};
use crate::error::{Error, Result};

/// `max_j {k_j - θ_j·u}` and the index attaining it (first on ties).
pub fn sup_transform(theta: &[f64], k: &[f64], u: f64) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (j, (&th, &kv)) in theta.iter().zip(k).enumerate() {
        let v = kv - th * u;
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, j));
        }
    }
    best
}

/// `min_i {ψ_i + θ·u_i}` and the index attaining it.
pub fn inf_transform(u: &[f64], psi: &[f64], theta: f64) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for (i, (&ui, &pv)) in u.iter().zip(psi).enumerate() {
        let v = pv + theta * ui;
        if best.is_none_or(|(b, _)| v < b) {
            best = Some((v, i));
        }
    }
    best
}

/// A function sampled on a grid, with pointwise SEs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Sampled {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub ses: Vec<f64>,
}

impl Sampled {
    pub fn exact(grid: &[f64], f: impl Fn(f64) -> f64) -> Sampled {
        Sampled { grid: grid.to_vec(), values: grid.iter().map(|&a| f(a)).collect(), ses: vec![0.0; grid.len()] }
    }

    /// Limit column of a table, or the row of one `n`; one-sided and empty
    /// cells are left out.
    pub fn from_table(t: &RateFunctionTable, n: Option<u32>) -> Result<Sampled> {
        let mut s = Sampled { grid: Vec::new(), values: Vec::new(), ses: Vec::new() };
        match n {
            None => {
                for (a, e) in t.grid.iter().zip(&t.limit) {
                    if e.value.is_finite() {
                        s.grid.push(*a);
                        s.values.push(e.value);
                        s.ses.push(e.se);
                    }
                }
            }
            Some(n) => {
                let row = t.row(n).ok_or_else(|| Error::InvalidArgument(format!("n = {n} not in table")))?;
                for c in row.iter().filter(|c| c.is_point()) {
                    s.grid.push(c.arg);
                    s.values.push(c.value);
                    s.ses.push(c.se);
                }
            }
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LegendreRow {
    pub u: f64,
    pub psi: f64,
    pub psi_se: f64,
    /// `sup_θ {K(θ) - θu}` over the θ grid.
    pub transform: f64,
    pub transform_se: f64,
    pub theta_star: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LegendreReport {
    pub rows: Vec<LegendreRow>,
    pub max_discrepancy: f64,
    pub all_ok: bool,
    /// Set when the θ grid has a single point, so the sup is that point.
    pub note: Option<String>,
}

/// Compares `Ψ` with the discrete sup-transform of `K` at every `u` of the
/// Ψ grid. Tolerance per row is `max(se_factor·combined SE, rel·|Ψ|)`.
pub fn legendre_check(psi: &Sampled, k: &Sampled, se_factor: f64, rel: f64) -> Result<LegendreReport> {
    if k.grid.is_empty() || psi.grid.is_empty() {
        return Err(Error::InsufficientData("empty grid in Legendre check".into()));
    }
    let mut rows = Vec::with_capacity(psi.grid.len());
    for i in 0..psi.grid.len() {
        let u = psi.grid[i];
        let (tr, j) = sup_transform(&k.grid, &k.values, u).expect("nonempty grid");
        let combined = (psi.ses[i] * psi.ses[i] + k.ses[j] * k.ses[j]).sqrt();
        let discrepancy = (psi.values[i] - tr).abs();
        let tolerance = (se_factor * combined).max(rel * psi.values[i].abs());
        rows.push(LegendreRow {
            u,
            psi: psi.values[i],
            psi_se: psi.ses[i],
            transform: tr,
            transform_se: k.ses[j],
            theta_star: k.grid[j],
            discrepancy,
            tolerance,
            ok: discrepancy <= tolerance,
        });
    }
    Ok(LegendreReport {
        max_discrepancy: rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max),
        all_ok: rows.iter().all(|r| r.ok),
        rows,
        note: (k.grid.len() == 1).then(|| format!("single theta = {}; sup is that point", k.grid[0])),
    })
}

/// Same check, reading both functions from rate tables.
pub fn legendre_check_tables(
    psi: &RateFunctionTable,
    k: &RateFunctionTable,
    n: Option<u32>,
    se_factor: f64,
    rel: f64,
) -> Result<LegendreReport> {
    if psi.kind != RateKind::Psi || k.kind != RateKind::K || psi.x != k.x {
        return Err(Error::InvalidArgument("need a Psi and a K table for the same x".into()));
    }
    legendre_check(&Sampled::from_table(psi, n)?, &Sampled::from_table(k, n)?, se_factor, rel)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Oracle pair, checked by hand: for u ≥ 0 the inf of max(0, 1-u) + θu
    // is min(θ, 1), and sup_θ≥0 {min(θ, 1) - θu} is 1 - u below 1, 0 above.
    #[test]
    fn kink_pair_is_exact() {
        let theta: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
        let u: Vec<f64> = (0..=30).map(|i| i as f64 * 0.05).collect();
        let k = Sampled::exact(&theta, |t| t.min(1.0));
        let psi = Sampled::exact(&u, |x| (1.0 - x).max(0.0));
        let r = legendre_check(&psi, &k, 2.0, 0.0).unwrap();
        assert!(r.max_discrepancy < 1e-12, "{}", r.max_discrepancy);
        for (j, &t) in theta.iter().enumerate() {
            let (v, _) = inf_transform(&u, &psi.values, t).unwrap();
            assert!((v - k.values[j]).abs() < 1e-12);
        }
    }

    // K(θ) = θ - θ² is concave; its transform is (1-u)²/4 for u ≤ 1 with
    // maximiser θ* = (1-u)/2. On a grid of step h the discrete sup is below
    // by at most h²/4 at the worst offset.
    #[test]
    fn parabola_pair_within_grid_resolution() {
        let h = 0.01;
        let theta: Vec<f64> = (0..=100).map(|i| i as f64 * h).collect();
        for &u in &[0.0, 0.13, 0.5, 0.77, 1.0] {
            let (v, _) = sup_transform(&theta, &theta.iter().map(|t| t - t * t).collect::<Vec<_>>(), u).unwrap();
            let exact = (1.0 - u) * (1.0 - u) / 4.0;
            assert!(v <= exact + 1e-15 && exact - v <= h * h / 4.0 + 1e-15);
        }
    }

    #[test]
    fn k_zero_keeps_psi_nonnegative() {
        let k = Sampled::exact(&[0.0, 1.0, 2.0], |t| 0.3 * t);
        for u in [0.0, 1.0, 5.0] {
            assert!(sup_transform(&k.grid, &k.values, u).unwrap().0 >= 0.0);
        }
    }

    #[test]
    fn single_theta() {
        let k = Sampled::exact(&[0.5], |_| 0.2);
        let psi = Sampled::exact(&[0.0, 0.4], |u| 0.2 - 0.5 * u);
        let r = legendre_check(&psi, &k, 2.0, 0.0).unwrap();
        assert!(r.note.is_some() && r.all_ok);
    }
}
