//! Oriented percolation on the alternate graph, good block events of the
//! contact process and the macroscopic field built from them.
//!
//! Level `n` of the alternate graph holds a copy of Z^d; the edge
//! `(z, n-1) → (z + v, n)` exists for the `2d + 1` steps `‖v‖₁ ≤ 1`, indexed
//! in the order of [`step_directions`].

use rand::Rng;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::contact::{Configuration, Evolver};
use crate::error::{Error, Result};
use crate::harris::{ClockId, HarrisSystem};
use crate::lattice::{cube, half_open_cube, step_directions, BoxIndex, Site};
use crate::rng::{keyed_stream, Purpose};
use crate::stats::{binomial, z_two_sided};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Provenance {
    Bernoulli { p: f64, seed: u64 },
    Derived { x: Site, params: BlockParams },
}

/// Edge values `W^n_{(z, v)}` for levels `1..=depth` and sources `z` with
/// `‖z‖∞ ≤ width`. Edges outside the stored region read as closed.
#[derive(Clone, Debug)]
pub struct OrientedField {
    dim: usize,
    depth: usize,
    index: BoxIndex,
    steps: Vec<Site>,
    values: Vec<bool>,
    /// Sources of level `n` whose entrance point is finite (derived fields).
    tracked: Option<Vec<bool>>,
    pub provenance: Provenance,
}

impl OrientedField {
    fn filled(dim: usize, depth: usize, width: u32, value: bool, provenance: Provenance) -> OrientedField {
        let index = BoxIndex::new(dim, width);
        let steps = step_directions(dim);
        let len = depth * index.len() * steps.len();
        OrientedField { dim, depth, index, steps, values: vec![value; len], tracked: None, provenance }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> u32 {
        self.index.radius as u32
    }

    pub fn steps(&self) -> &[Site] {
        &self.steps
    }

    fn slot(&self, level: usize, z: Site, dir: usize) -> Option<usize> {
        if level == 0 || level > self.depth {
            return None;
        }
        let i = self.index.index(z)?;
        Some(((level - 1) * self.index.len() + i) * self.steps.len() + dir)
    }

    /// Edge `(z, level-1) → (z + steps[dir], level)`.
    pub fn is_open(&self, level: usize, z: Site, dir: usize) -> bool {
        self.slot(level, z, dir).is_some_and(|k| self.values[k])
    }

    pub fn set(&mut self, level: usize, z: Site, dir: usize, open: bool) {
        if let Some(k) = self.slot(level, z, dir) {
            self.values[k] = open;
        }
    }

    /// Whether source `(z, level-1)` of the edges at `level` was a tracked box.
    pub fn is_tracked(&self, level: usize, z: Site) -> bool {
        match (&self.tracked, self.index.index(z)) {
            (Some(t), Some(i)) if level >= 1 && level <= self.depth => t[(level - 1) * self.index.len() + i],
            _ => false,
        }
    }

    /// Rows `(level, z, step, open)` in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (usize, Site, Site, bool)> + '_ {
        (1..=self.depth).flat_map(move |n| {
            self.index.sites().flat_map(move |z| {
                (0..self.steps.len()).map(move |d| (n, z, self.steps[d], self.is_open(n, z, d)))
            })
        })
    }

    pub fn open_count(&self) -> usize {
        self.values.iter().filter(|&&v| v).count()
    }

    pub fn edge_count(&self) -> usize {
        self.values.len()
    }
}

/// iid Bernoulli(p) edges; edge `k` in storage order is open iff `U_k < p`,
/// so fields with the same seed are coupled monotonically in `p`.
pub fn bernoulli_field(p: f64, depth: usize, width: u32, dim: usize, seed: u64) -> Result<OrientedField> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("p = {p} outside [0, 1]")));
    }
    let mut f = OrientedField::filled(dim, depth, width, false, Provenance::Bernoulli { p, seed });
    let mut rng = keyed_stream(seed, Purpose::Bond, 0, Site::ORIGIN);
    for v in f.values.iter_mut() {
        *v = rng.random::<f64>() < p;
    }
    Ok(f)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OpLifetime {
    Finite(usize),
    /// Still alive at the field depth.
    AliveAtDepth,
}

fn level_sets(field: &OrientedField, x: Site) -> Vec<Vec<Site>> {
    let mut levels = vec![vec![x]];
    for n in 1..=field.depth {
        let prev = &levels[n - 1];
        let mut next: Vec<Site> = Vec::new();
        for &z in prev {
            for (d, &v) in field.steps.iter().enumerate() {
                if field.is_open(n, z, d) {
                    next.push(z + v);
                }
            }
        }
        next.sort();
        next.dedup();
        let empty = next.is_empty();
        levels.push(next);
        if empty {
            break;
        }
    }
    levels
}

/// `τ̄^x = max{n : ξ̄^x_n ≠ ∅}`.
pub fn op_lifetime(field: &OrientedField, x: Site) -> OpLifetime {
    let levels = level_sets(field, x);
    let last = levels.iter().rposition(|l| !l.is_empty()).unwrap_or(0);
    if last == field.depth {
        OpLifetime::AliveAtDepth
    } else {
        OpLifetime::Finite(last)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ImmortalDensity {
    Value(usize),
    /// The density condition fails at the last certified level.
    Censored,
}

/// Levels `n ≤ depth` with `(x, 0) → (y, n)` and `(y, n)` connected to the
/// top level (the proxy for an infinite path).
pub fn immortal_levels(field: &OrientedField, x: Site, y: Site) -> Vec<bool> {
    let n_max = field.depth;
    let forward = level_sets(field, x);
    // alive[n]: sites at level n connected to level n_max.
    let bi = field.index;
    let mut alive = vec![vec![false; bi.len()]; n_max + 1];
    alive[n_max] = vec![true; bi.len()];
    for n in (0..n_max).rev() {
        for i in 0..bi.len() {
            let z = bi.site(i);
            alive[n][i] = field.steps.iter().enumerate().any(|(d, &v)| {
                field.is_open(n + 1, z, d) && bi.index(z + v).is_some_and(|j| alive[n + 1][j])
            });
        }
    }
    (0..=n_max)
        .map(|n| {
            forward.get(n).is_some_and(|l| l.binary_search(&y).is_ok())
                && bi.index(y).is_some_and(|j| alive[n][j])
        })
        .collect()
}

/// `γ̄(θ, x, y)`: smallest `n` such that for every `k` in
/// `[n, depth - slack]`, `#({0..k} ∩ Ḡ(x, y)) ≥ θk`.
pub fn immortal_density(field: &OrientedField, x: Site, y: Site, theta: f64, slack: usize) -> Result<ImmortalDensity> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidArgument(format!("theta = {theta} outside (0, 1)")));
    }
    if slack >= field.depth {
        return Err(Error::InvalidArgument("slack must be smaller than the depth".into()));
    }
    let g = immortal_levels(field, x, y);
    let top = field.depth - slack;
    let mut count = 0usize;
    let mut last_fail = None;
    for (k, &in_g) in g.iter().enumerate().take(top + 1) {
        count += usize::from(in_g);
        if (count as f64) < theta * k as f64 {
            last_fail = Some(k);
        }
    }
    Ok(match last_fail {
        Some(k) if k == top => ImmortalDensity::Censored,
        Some(k) => ImmortalDensity::Value(k + 1),
        None => ImmortalDensity::Value(0),
    })
}

/// Block scales of the good events.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockParams {
    /// Half-size of the entrance and exit areas.
    pub i: u32,
    /// Half-size of a block.
    pub l: u32,
    pub delta: f64,
    pub c1: f64,
    pub m1: f64,
    pub alpha: f64,
}

impl BlockParams {
    /// Block duration `C₁·L`.
    pub fn block_time(&self) -> f64 {
        self.c1 * f64::from(self.l)
    }

    /// Radius of the containment box, `⌊M₁·L⌋`.
    pub fn containment_radius(&self) -> i32 {
        (self.m1 * f64::from(self.l)).floor() as i32
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.i < 1 || self.l < 1 {
            v.push("I and L must be positive".to_string());
        }
        if self.i > self.l {
            v.push(format!("need I <= L, got I = {}, L = {}", self.i, self.l));
        }
        if !(self.c1 > 0.0 && self.m1 > 0.0) {
            v.push("C1 and M1 must be positive".to_string());
        }
        if !(self.delta > 0.0) {
            v.push("delta must be positive".to_string());
        }
        if !(self.delta < self.block_time()) {
            v.push(format!("need delta < C1*L, got delta = {}, C1*L = {}", self.delta, self.block_time()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            v.push(format!("alpha = {} outside (0, 1)", self.alpha));
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
}

/// `x = 2L[x] + {x}` with `{x} ∈ [-L, L)^d`.
pub fn block_decompose(x: Site, l: u32, dim: usize) -> (Site, Site) {
    let two_l = 2 * l as i32;
    let mut block = Site::ORIGIN;
    let mut rel = Site::ORIGIN;
    for i in 0..dim {
        let v = x.0[i] + l as i32;
        block.0[i] = v.div_euclid(two_l);
        rel.0[i] = v.rem_euclid(two_l) - l as i32;
    }
    (block, rel)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailedCondition {
    /// The target is never occupied early enough with a death-free δ window.
    Hit,
    /// No exit area is colonized at the end of the block.
    Exit,
    /// Descendants of the fattened block leave the containment box.
    Containment,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GoodEventOutcome {
    pub occurred: bool,
    /// Exit point relative to its block, in `[-L, L)^d`.
    pub exit_point: Option<Site>,
    pub witness_t: Option<f64>,
    pub failed: Option<FailedCondition>,
}

impl GoodEventOutcome {
    fn failed(c: FailedCondition) -> GoodEventOutcome {
        GoodEventOutcome { occurred: false, exit_point: None, witness_t: None, failed: Some(c) }
    }
}

/// Evaluates `A(n̄₀, u, x₀, x₁)` on `sys` (block time starting at view time 0).
pub fn good_event(
    sys: &HarrisSystem,
    params: &BlockParams,
    block: Site,
    u: Site,
    x0: Site,
    x1: Site,
) -> Result<GoodEventOutcome> {
    params.validate()?;
    let dim = sys.dim();
    let l = params.l as i32;
    let in_block = |z: Site| (0..dim).all(|i| z.0[i] >= -l && z.0[i] < l);
    if u.norm1() > 1 || !in_block(x0) || !in_block(x1) {
        return Err(Error::InvalidArgument(format!("need |u|_1 <= 1 and x0, x1 in [-L, L)^d, got {u:?}, {x0:?}, {x1:?}")));
    }
    let t_block = params.block_time();
    let center = block.scaled(2 * l);
    let m1l = params.containment_radius();
    if center.norm_inf() + i64::from(m1l) + 1 > i64::from(sys.window().radius) || t_block > sys.t_max() {
        return Err(Error::InvalidArgument(format!(
            "window (R = {}, t_max = {}) too small for block {block:?} (needs radius {} and time {t_block})",
            sys.window().radius,
            sys.t_max(),
            center.norm_inf() + i64::from(m1l) + 1
        )));
    }
    let i = params.i as i32;

    // Containment of the fattened block.
    let fat = Configuration::new(cube(dim, center, l + i));
    let mut ev = Evolver::new(sys, &fat)?;
    while let Some(e) = ev.step(t_block) {
        if e.delta > 0 && (e.site - center).norm_inf() > i64::from(m1l) {
            return Ok(GoodEventOutcome::failed(FailedCondition::Containment));
        }
    }

    // Occupation starts of the target, earliest first. Inside one
    // occupation interval the start dominates every later time.
    let target = center + x1;
    let entrance = Configuration::new(cube(dim, center + x0, i));
    let mut starts = Vec::new();
    if entrance.contains(target) {
        starts.push(0.0);
    }
    let mut ev = Evolver::new(sys, &entrance)?;
    while let Some(e) = ev.step(t_block - params.delta) {
        if e.site == target && e.delta > 0 {
            starts.push(e.time);
        }
    }
    let deaths = sys.stream(ClockId::death(target)).times;
    let exit_center = (block + u).scaled(2 * l);
    let exits = half_open_cube(dim, Site::ORIGIN, l);
    let mut hit = false;
    for t in starts {
        if deaths.iter().any(|&d| d >= t && d <= t + params.delta) {
            continue;
        }
        hit = true;
        let shifted = sys.time_shift(t)?;
        let mut ev = Evolver::new(&shifted, &Configuration::singleton(target))?;
        ev.run_to(t_block - t);
        if ev.count() == 0 {
            continue;
        }
        for &s in &exits {
            let abs = exit_center + s;
            if cube(dim, abs, i).into_iter().all(|z| ev.is_occupied(z)) {
                return Ok(GoodEventOutcome { occurred: true, exit_point: Some(s), witness_t: Some(t), failed: None });
            }
        }
    }
    Ok(GoodEventOutcome::failed(if hit { FailedCondition::Exit } else { FailedCondition::Hit }))
}

/// Derived field together with the entrance points `d_n` of every level.
#[derive(Clone, Debug)]
pub struct MacroscopicField {
    pub field: OrientedField,
    /// `entries[n]`: boxes with finite `d_n`, and that entrance point.
    pub entries: Vec<Vec<(Site, Site)>>,
}

/// Builds the field `W^n_{(ȳ, u)}` for site `x` up to `depth` levels.
pub fn macroscopic_field(sys: &HarrisSystem, params: &BlockParams, x: Site, depth: usize) -> Result<MacroscopicField> {
    params.validate()?;
    let dim = sys.dim();
    let (_, target) = block_decompose(x, params.l, dim);
    let t_block = params.block_time();
    let mut field = OrientedField::filled(
        dim,
        depth,
        depth as u32,
        true,
        Provenance::Derived { x, params: *params },
    );
    let mut tracked = vec![false; depth * field.index.len()];
    let steps = field.steps.clone();
    let mut current: Vec<(Site, Site)> = vec![(Site::ORIGIN, Site::ORIGIN)];
    let mut entries = vec![current.clone()];
    for n in 0..depth {
        let level_sys = sys.time_shift(n as f64 * t_block)?;
        let mut next: FxHashMap<Site, Site> = FxHashMap::default();
        for &(b, entry) in &current {
            if let Some(k) = field.index.index(b) {
                tracked[n * field.index.len() + k] = true;
            }
            for (d, &u) in steps.iter().enumerate() {
                let out = good_event(&level_sys, params, b, u, entry, target)?;
                field.set(n + 1, b, d, out.occurred);
                if let Some(s) = out.exit_point {
                    next.entry(b + u).and_modify(|e| *e = (*e).min(s)).or_insert(s);
                }
            }
        }
        let mut v: Vec<(Site, Site)> = next.into_iter().collect();
        v.sort();
        current = v;
        entries.push(current.clone());
    }
    field.tracked = Some(tracked);
    Ok(MacroscopicField { field, entries })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Stratum {
    pub tracked: bool,
    /// Open in-edges of the source, capped at 2.
    pub open_in: usize,
    /// State of the same edge in the block `M` steps away along `e_1`.
    pub far_open: bool,
    pub count: usize,
    pub frequency: f64,
    pub se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CdReport {
    pub fields: usize,
    pub strata: Vec<Stratum>,
    pub min_frequency: f64,
    pub min_stratum_se: f64,
    /// Smallest populated stratum frequency reaches `q` within its CI.
    pub exceeds_q: bool,
    pub q: f64,
    pub note: &'static str,
}

pub const MIN_ENSEMBLE: usize = 1000;

/// Stratified conditional frequency of open edges given a coarse summary of
/// the past and of one edge at distance `m`. A projection of the class
/// condition, not a verification of it.
pub fn class_cd_diagnostic(
    fields: &[OrientedField],
    m: i32,
    q: f64,
    min_count: usize,
    ci_level: f64,
) -> Result<CdReport> {
    if fields.len() < MIN_ENSEMBLE {
        return Err(Error::InsufficientData(format!(
            "class diagnostic needs at least {MIN_ENSEMBLE} fields, got {}",
            fields.len()
        )));
    }
    let mut counts: FxHashMap<(bool, usize, bool), (usize, usize)> = FxHashMap::default();
    for f in fields {
        let far_shift = Site::unit(0).scaled(m);
        for n in 2..=f.depth {
            for z in f.index.sites() {
                let derived = f.tracked.is_some();
                let tracked = f.is_tracked(n, z);
                if derived && !tracked {
                    continue;
                }
                let mut open_in = 0;
                for (d, &v) in f.steps.iter().enumerate() {
                    if f.is_open(n - 1, z - v, d) {
                        open_in += 1;
                    }
                }
                for d in 0..f.steps.len() {
                    let far = z + far_shift;
                    if f.index.index(far).is_none() {
                        continue;
                    }
                    let key = (tracked, open_in.min(2), f.is_open(n, far, d));
                    let c = counts.entry(key).or_insert((0, 0));
                    c.0 += 1;
                    c.1 += usize::from(f.is_open(n, z, d));
                }
            }
        }
    }
    let mut keys: Vec<_> = counts.keys().copied().collect();
    keys.sort();
    let strata: Vec<Stratum> = keys
        .into_iter()
        .map(|k| {
            let (total, open) = counts[&k];
            let (p, se) = binomial(open, total);
            Stratum { tracked: k.0, open_in: k.1, far_open: k.2, count: total, frequency: p, se }
        })
        .collect();
    let populated: Vec<&Stratum> = strata.iter().filter(|s| s.count >= min_count).collect();
    let Some(worst) = populated.iter().min_by(|a, b| a.frequency.total_cmp(&b.frequency)) else {
        return Err(Error::InsufficientData(format!("no stratum reaches {min_count} edges")));
    };
    let z = z_two_sided(ci_level);
    Ok(CdReport {
        fields: fields.len(),
        min_frequency: worst.frequency,
        min_stratum_se: worst.se,
        exceeds_q: worst.frequency + z * worst.se >= q,
        q,
        strata: strata.clone(),
        note: "diagnostic projection: conditions on a coarse summary of the past only",
    })
}

/// Pilot block constants from the time constant `μ(e₁)` and the growth
/// constant `M̂`: `C₁ = factor · μ(e₁)`, `M₁ = M̂·C₁ + 2`.
pub fn pilot_block_constants(mu_e1: f64, growth: f64, factor: f64) -> (f64, f64) {
    let c1 = factor * mu_e1;
    (c1, growth * c1 + 2.0)
}
