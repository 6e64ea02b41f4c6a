//! Small statistical helpers: estimates with standard errors, binomial
//! proportions, correlation, weighted line fits and Kolmogorov–Smirnov
//! statistics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// A point estimate with its standard error and bookkeeping counts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
    pub ci_level: f64,
    /// Samples that entered the estimate.
    pub n: usize,
    /// Samples dropped because an observable was censored at the horizon.
    pub censored: usize,
    /// Samples dropped because the run touched the window boundary.
    pub excluded: usize,
}

impl Estimate {
    pub fn new(value: f64, se: f64, n: usize) -> Estimate {
        Estimate { value, se, ci_level: 0.95, n, censored: 0, excluded: 0 }
    }

    pub fn exact(value: f64) -> Estimate {
        Estimate::new(value, 0.0, 1)
    }

    pub fn half_width(&self) -> f64 {
        z_two_sided(self.ci_level) * self.se
    }

    pub fn lower(&self) -> f64 {
        self.value - self.half_width()
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width()
    }
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn z_two_sided(level: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    n.inverse_cdf(0.5 + level / 2.0)
}

/// Two-sided Student t quantile.
pub fn t_two_sided(level: f64, dof: f64) -> f64 {
    if !dof.is_finite() || dof > 1.0e6 {
        return z_two_sided(level);
    }
    let t = StudentsT::new(0.0, 1.0, dof).expect("valid dof");
    t.inverse_cdf(0.5 + level / 2.0)
}

/// Sample mean and standard error of the mean (sequential summation, so
/// the result only depends on sample order).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Proportion `k / n` with its binomial standard error.
pub fn binomial(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = k as f64 / n as f64;
    (p, (p * (1.0 - p) / n as f64).sqrt())
}

/// `|a - b| <= k * sqrt(se_a² + se_b²)`.
pub fn agree_within(a: &Estimate, b: &Estimate, k: f64) -> bool {
    (a.value - b.value).abs() <= k * (a.se * a.se + b.se * b.se).sqrt()
}

/// Pearson correlation; `None` when either sample has zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Fisher-z confidence interval for a correlation coefficient.
pub fn fisher_ci(r: f64, n: usize, level: f64) -> (f64, f64) {
    if n <= 3 {
        return (-1.0, 1.0);
    }
    let z = r.clamp(-0.999_999_999, 0.999_999_999).atanh();
    let h = z_two_sided(level) / ((n - 3) as f64).sqrt();
    ((z - h).tanh(), (z + h).tanh())
}

/// Least-squares line `y = intercept + slope·x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
    pub intercept_se: f64,
    pub r2: f64,
    pub residuals: Vec<f64>,
    pub points: usize,
}

/// Ordinary least squares; the slope SE uses the residual variance.
pub fn ols(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let w = vec![1.0; xs.len()];
    let mut fit = weighted_fit(xs, ys, &w)?;
    let n = xs.len();
    let rss: f64 = fit.residuals.iter().map(|r| r * r).sum();
    let s2 = if n > 2 { rss / (n - 2) as f64 } else { 0.0 };
    fit.slope_se *= s2.sqrt();
    fit.intercept_se *= s2.sqrt();
    Some(fit)
}

/// Weighted least squares with weights `1/se²`; parameter SEs treat the
/// point SEs as known.
pub fn wls(xs: &[f64], ys: &[f64], ses: &[f64]) -> Option<LineFit> {
    if ses.iter().any(|&s| !(s > 0.0)) {
        return None;
    }
    let w: Vec<f64> = ses.iter().map(|s| 1.0 / (s * s)).collect();
    weighted_fit(xs, ys, &w)
}

fn weighted_fit(xs: &[f64], ys: &[f64], w: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n || w.len() != n {
        return None;
    }
    let sw: f64 = w.iter().sum();
    let mx = xs.iter().zip(w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        sxx += w[i] * (xs[i] - mx) * (xs[i] - mx);
        sxy += w[i] * (xs[i] - mx) * (ys[i] - my);
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| y - (intercept + slope * x)).collect();
    let ss_res: f64 = residuals.iter().zip(w).map(|(r, w)| w * r * r).sum();
    let ss_tot: f64 = ys.iter().zip(w).map(|(y, w)| w * (y - my) * (y - my)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_se: (1.0 / sxx).sqrt(),
        intercept_se: (1.0 / sw + mx * mx / sxx).sqrt(),
        r2,
        residuals,
        points: n,
    })
}

/// One-sample KS statistic of `xs` against the CDF `f`.
pub fn ks_statistic<F: Fn(f64) -> f64>(xs: &[f64], f: F) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let c = f(x);
        d = d.max((i as f64 + 1.0) / n - c).max(c - i as f64 / n);
    }
    d
}

/// Two-sample KS statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic Kolmogorov tail `P(sqrt(n)·D > sqrt(n)·d)` for effective size `n`.
pub fn kolmogorov_pvalue(d: f64, n_eff: f64) -> f64 {
    let x = (n_eff.sqrt() + 0.12 + 0.11 / n_eff.sqrt()) * d;
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = 2.0 * (-1.0f64).powf(k - 1.0) * (-2.0 * k * k * x * x).exp();
        s += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    s.clamp(0.0, 1.0)
}
