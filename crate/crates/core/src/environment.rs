//! Birth-rate environments `λ = (λ_e)` on the edges of Z^d.
//!
//! Rates are resolved lazily per edge: an iid environment draws the rate of
//! edge `e` from a stream keyed by `(seed, e)`, so translated or enlarged
//! windows agree with every edge already seen.

use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{BoxIndex, Edge, Site, Window, MAX_DIM};
use crate::rng::{keyed_uniform, Purpose};

/// Law of the environment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvironmentKind {
    /// Every edge carries the same rate.
    Dirac { rate: f64 },
    /// Product measure with a finite-support marginal, given as
    /// `(rate, probability)` pairs.
    IidFiniteSupport { support: Vec<(f64, f64)> },
    /// Deterministic pattern: edge `{z, z + e_i}` gets
    /// `pattern[(z_1 + ... + z_d) mod len]`.
    Periodic { pattern: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(flatten)]
    pub kind: EnvironmentKind,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub dim: usize,
}

impl EnvironmentSpec {
    pub fn dirac(rate: f64, dim: usize) -> EnvironmentSpec {
        EnvironmentSpec { kind: EnvironmentKind::Dirac { rate }, lambda_min: rate, lambda_max: rate, dim }
    }

    /// Lists every invariant violation; empty when the spec is valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(1..=MAX_DIM).contains(&self.dim) {
            out.push(format!("dimension {} outside 1..={MAX_DIM}", self.dim));
        }
        if !(self.lambda_min > 0.0 && self.lambda_min <= self.lambda_max && self.lambda_max.is_finite()) {
            out.push(format!(
                "need 0 < lambda_min <= lambda_max, got [{}, {}]",
                self.lambda_min, self.lambda_max
            ));
        }
        let in_range = |r: f64| r >= self.lambda_min && r <= self.lambda_max;
        match &self.kind {
            EnvironmentKind::Dirac { rate } => {
                if !in_range(*rate) {
                    out.push(format!("rate {rate} outside [lambda_min, lambda_max]"));
                }
            }
            EnvironmentKind::IidFiniteSupport { support } => {
                if support.is_empty() {
                    out.push("empty support".into());
                }
                for &(r, p) in support {
                    if !in_range(r) {
                        out.push(format!("support rate {r} outside [lambda_min, lambda_max]"));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        out.push(format!("probability {p} outside [0, 1]"));
                    }
                }
                let total: f64 = support.iter().map(|&(_, p)| p).sum();
                if (total - 1.0).abs() > 1e-9 {
                    out.push(format!("probabilities sum to {total}, expected 1"));
                }
            }
            EnvironmentKind::Periodic { pattern } => {
                if pattern.is_empty() {
                    out.push("empty periodic pattern".into());
                }
                for &r in pattern {
                    if !in_range(r) {
                        out.push(format!("pattern rate {r} outside [lambda_min, lambda_max]"));
                    }
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidSpec(v.join("; ")))
        }
    }

    fn rate_at(&self, seed: u64, e: Edge) -> f64 {
        match &self.kind {
            EnvironmentKind::Dirac { rate } => *rate,
            EnvironmentKind::IidFiniteSupport { support } => {
                let u = keyed_uniform(seed, Purpose::Environment, u32::from(e.dir), e.base);
                let mut acc = 0.0;
                for &(r, p) in support {
                    acc += p;
                    if u < acc {
                        return r;
                    }
                }
                support.last().map(|&(r, _)| r).unwrap_or(self.lambda_min)
            }
            EnvironmentKind::Periodic { pattern } => {
                let s: i64 = e.base.0[..self.dim].iter().map(|&v| i64::from(v)).sum();
                pattern[s.rem_euclid(pattern.len() as i64) as usize]
            }
        }
    }
}

/// A realised environment seen from `origin_offset`: the rate of edge `e`
/// is the underlying rate of `e + origin_offset`.
#[derive(Clone, Debug)]
pub struct Environment {
    spec: Arc<EnvironmentSpec>,
    seed: u64,
    radius: u32,
    origin_offset: Site,
}

impl Environment {
    pub fn spec(&self) -> &EnvironmentSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn origin_offset(&self) -> Site {
        self.origin_offset
    }

    pub fn lambda_max(&self) -> f64 {
        self.spec.lambda_max
    }

    pub fn rate(&self, e: Edge) -> f64 {
        self.spec.rate_at(self.seed, e.translated(self.origin_offset))
    }

    /// Rate between two neighbouring sites.
    pub fn rate_between(&self, a: Site, b: Site) -> Option<f64> {
        Edge::between(a, b).map(|e| self.rate(e))
    }

    /// Every edge with both endpoints in the window, with its rate.
    pub fn rates(&self) -> Vec<(Edge, f64)> {
        let bi = BoxIndex::new(self.spec.dim, self.radius);
        let mut out = Vec::new();
        for z in bi.sites() {
            for dir in 0..self.spec.dim {
                let e = Edge::new(z, dir);
                if bi.contains(e.tip()) {
                    out.push((e, self.rate(e)));
                }
            }
        }
        out
    }

    /// `(x.λ)_e = λ_{x+e}`.
    pub fn translate(&self, x: Site) -> Environment {
        Environment { origin_offset: self.origin_offset + x, ..self.clone() }
    }
}

/// Samples an environment on `window`; deterministic in `(spec, window, seed)`.
pub fn sample_environment(spec: &EnvironmentSpec, window: &Window, seed: u64) -> Result<Environment> {
    spec.validate()?;
    Ok(Environment { spec: Arc::new(spec.clone()), seed, radius: window.radius, origin_offset: Site::ORIGIN })
}

pub fn translate_environment(env: &Environment, x: Site) -> Environment {
    env.translate(x)
}
