//! Event-driven contact process on a [`HarrisSystem`].
//!
//! Only clocks attached to occupied sites are kept in the event queue; all
//! other clocks would be no-ops. The process lives on the window `B_R`:
//! infection arrows leaving the window are ignored and a run that ever
//! occupies a boundary site is flagged as contaminated.

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::Serialize;
use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::harris::{ClockId, ClockKind, HarrisSystem, TimeMap, ViewCursor};
use crate::lattice::{BoxIndex, Edge, Site, Window};
use crate::rng::replica_seed;
use crate::stats::{binomial, Estimate};

/// A finite set of occupied sites, kept sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Configuration {
    sites: Vec<Site>,
}

impl Configuration {
    pub fn new<I: IntoIterator<Item = Site>>(sites: I) -> Configuration {
        let mut sites: Vec<Site> = sites.into_iter().collect();
        sites.sort();
        sites.dedup();
        Configuration { sites }
    }

    pub fn empty() -> Configuration {
        Configuration::default()
    }

    pub fn singleton(z: Site) -> Configuration {
        Configuration { sites: vec![z] }
    }

    /// Every site of `B_R` in dimension `dim`.
    pub fn full(dim: usize, radius: u32) -> Configuration {
        Configuration::new(BoxIndex::new(dim, radius).sites())
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn contains(&self, z: Site) -> bool {
        self.sites.binary_search(&z).is_ok()
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn union(&self, other: &Configuration) -> Configuration {
        Configuration::new(self.sites.iter().chain(&other.sites).copied())
    }

    pub fn is_subset(&self, other: &Configuration) -> bool {
        self.sites.iter().all(|&z| other.contains(z))
    }

    pub fn intersects(&self, other: &Configuration) -> bool {
        self.sites.iter().any(|&z| other.contains(z))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum EventKind {
    Death,
    Infection,
}

/// One effective event: the occupation of `site` changed by `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LoggedEvent {
    /// View time.
    pub time: f64,
    /// Time on the underlying clock, used for exact comparisons across views.
    pub source_time: f64,
    pub clock: ClockId,
    pub kind: EventKind,
    pub site: Site,
    /// Infecting neighbour for infections.
    pub parent: Option<Site>,
    pub delta: i8,
}

impl LoggedEvent {
    /// Same clock event and same effect, ignoring the view time.
    pub fn same_event(&self, other: &LoggedEvent) -> bool {
        self.source_time.to_bits() == other.source_time.to_bits()
            && self.clock == other.clock
            && self.kind == other.kind
            && self.site == other.site
            && self.parent == other.parent
            && self.delta == other.delta
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub initial: Configuration,
    pub events: Vec<LoggedEvent>,
    pub final_time: f64,
    pub final_state: Configuration,
    pub boundary_contaminated: bool,
    pub extinct_at: Option<f64>,
}

impl Trajectory {
    /// `τ^A`; `None` when alive at the final time.
    pub fn lifetime(&self) -> Option<f64> {
        self.extinct_at
    }

    /// `t^A(x)`; `None` when `x` is not hit before the final time.
    pub fn hitting_time(&self, x: Site) -> Option<f64> {
        if self.initial.contains(x) {
            return Some(0.0);
        }
        self.events.iter().find(|e| e.site == x && e.delta > 0).map(|e| e.time)
    }

    /// Occupied set at time `t` (right-continuous).
    pub fn state_at(&self, t: f64) -> Configuration {
        let mut occ: FxHashMap<Site, bool> = self.initial.sites().iter().map(|&z| (z, true)).collect();
        for e in self.events.iter().take_while(|e| e.time <= t) {
            occ.insert(e.site, e.delta > 0);
        }
        Configuration::new(occ.into_iter().filter(|&(_, v)| v).map(|(z, _)| z))
    }

    /// Maximal intervals `[a, b)` on which `x` is occupied; an interval
    /// still open at the final time ends there.
    pub fn occupancy_intervals(&self, x: Site) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        let mut start = if self.initial.contains(x) { Some(0.0) } else { None };
        for e in self.events.iter().filter(|e| e.site == x) {
            if e.delta > 0 {
                start = Some(e.time);
            } else if let Some(a) = start.take() {
                out.push((a, e.time));
            }
        }
        if let Some(a) = start {
            out.push((a, self.final_time));
        }
        out
    }

    /// Every site occupied at some time in `[0, t]`.
    pub fn ever_occupied(&self, t: f64) -> Configuration {
        Configuration::new(
            self.initial
                .sites()
                .iter()
                .copied()
                .chain(self.events.iter().filter(|e| e.delta > 0 && e.time <= t).map(|e| e.site)),
        )
    }

    /// Extracts an infection path ending at `(x, t)`.
    pub fn extract_path(&self, x: Site, t: f64) -> Result<InfectionPath> {
        let limit = self.events.partition_point(|e| e.time <= t);
        let mut occupy: FxHashMap<Site, Vec<usize>> = FxHashMap::default();
        for (i, e) in self.events[..limit].iter().enumerate() {
            if e.delta > 0 {
                occupy.entry(e.site).or_default().push(i);
            }
        }
        let last_occupy = |y: Site, before: usize| -> Option<usize> {
            let v = occupy.get(&y)?;
            let k = v.partition_point(|&i| i < before);
            if k == 0 {
                None
            } else {
                Some(v[k - 1])
            }
        };
        let alive = match last_occupy(x, limit) {
            Some(i) => !self.events[i + 1..limit].iter().any(|e| e.site == x && e.delta < 0),
            None => self.initial.contains(x) && !self.events[..limit].iter().any(|e| e.site == x),
        };
        if !alive {
            return Err(Error::NoPath(format!("{x:?} is not occupied at time {t}")));
        }
        let mut rev = vec![(x, t)];
        let mut y = x;
        let mut before = limit;
        let mut jumps = 0;
        while let Some(j) = last_occupy(y, before) {
            let e = &self.events[j];
            let p = e.parent.expect("occupation events carry a parent");
            rev.push((y, e.time));
            rev.push((p, e.time));
            y = p;
            before = j;
            jumps += 1;
        }
        rev.push((y, 0.0));
        rev.reverse();
        rev.dedup();
        Ok(InfectionPath { points: rev, horizontal_edges: jumps })
    }
}

/// Alternating vertical/horizontal space-time path.
#[derive(Clone, Debug, PartialEq)]
pub struct InfectionPath {
    pub points: Vec<(Site, f64)>,
    pub horizontal_edges: usize,
}

impl InfectionPath {
    /// Re-checks every segment against the clocks of `sys`: vertical pieces
    /// see no death, horizontal pieces sit on an infection event.
    pub fn validate(&self, sys: &HarrisSystem) -> bool {
        let mut jumps = 0;
        for w in self.points.windows(2) {
            let ((y0, s0), (y1, s1)) = (w[0], w[1]);
            if y0 == y1 {
                if s1 < s0 {
                    return false;
                }
                let deaths = sys.stream(ClockId::death(y0)).times;
                if deaths.iter().any(|&d| d > s0 && d <= s1) {
                    return false;
                }
            } else {
                let Some(e) = Edge::between(y0, y1) else { return false };
                if s0 != s1 || !sys.stream(ClockId::edge(e)).times.contains(&s0) {
                    return false;
                }
                jumps += 1;
            }
        }
        jumps == self.horizontal_edges
    }
}

#[derive(Clone, Copy)]
struct Pending {
    key: f64,
    idx: u32,
    source: f64,
}

impl PartialEq for Pending {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct ClockSlot {
    cursor: ViewCursor,
    scheduled: bool,
}

/// Incremental contact-process simulator over a system view.
///
/// Events are processed in `(time, clock order)` order; events at view time
/// exactly 0 are not part of the run.
pub struct Evolver<'a> {
    sys: &'a HarrisSystem,
    tm: TimeMap,
    bi: BoxIndex,
    dim: usize,
    slots_per_site: u32,
    occ: Vec<bool>,
    count: usize,
    heap: BinaryHeap<Reverse<Pending>>,
    slots: FxHashMap<u32, ClockSlot>,
    now: f64,
    contaminated: bool,
    extinct_at: Option<f64>,
}

impl<'a> Evolver<'a> {
    pub fn new(sys: &'a HarrisSystem, initial: &Configuration) -> Result<Evolver<'a>> {
        let dim = sys.dim();
        let window = sys.window();
        let bi = BoxIndex::new(dim, window.radius);
        let tm = sys.time_map();
        let mut ev = Evolver {
            sys,
            tm,
            bi,
            dim,
            slots_per_site: 1 + dim as u32,
            occ: vec![false; bi.len()],
            count: 0,
            heap: BinaryHeap::new(),
            slots: FxHashMap::default(),
            now: 0.0,
            contaminated: false,
            extinct_at: None,
        };
        let start = (tm.order_key(tm.source_time(0.0)), u32::MAX);
        for &z in initial.sites() {
            let Some(i) = bi.index(z) else {
                return Err(Error::InvalidArgument(format!("initial site {z:?} outside window")));
            };
            if !ev.occ[i] {
                ev.occupy(i, start);
            }
        }
        if ev.count == 0 {
            ev.extinct_at = Some(0.0);
        }
        Ok(ev)
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn contaminated(&self) -> bool {
        self.contaminated
    }

    pub fn extinct_at(&self) -> Option<f64> {
        self.extinct_at
    }

    pub fn is_occupied(&self, z: Site) -> bool {
        self.bi.index(z).is_some_and(|i| self.occ[i])
    }

    pub fn occupied(&self) -> Configuration {
        Configuration {
            sites: {
                let mut v: Vec<Site> = (0..self.occ.len()).filter(|&i| self.occ[i]).map(|i| self.bi.site(i)).collect();
                v.sort();
                v
            },
        }
    }

    fn clock_id(&self, idx: u32) -> ClockId {
        let site = self.bi.site((idx / self.slots_per_site) as usize);
        let slot = idx % self.slots_per_site;
        let kind = if slot == 0 { ClockKind::Death } else { ClockKind::Edge((slot - 1) as u8) };
        ClockId { site, kind }
    }

    fn occupy(&mut self, i: usize, after: (f64, u32)) {
        self.occ[i] = true;
        self.count += 1;
        let z = self.bi.site(i);
        if i64::from(self.bi.radius) == z.norm_inf() {
            self.contaminated = true;
        }
        let sps = self.slots_per_site;
        self.schedule(i as u32 * sps, after);
        for dir in 0..self.dim {
            let u = Site::unit(dir);
            if self.bi.contains(z + u) {
                self.schedule(i as u32 * sps + 1 + dir as u32, after);
            }
            if let Some(j) = self.bi.index(z - u) {
                self.schedule(j as u32 * sps + 1 + dir as u32, after);
            }
        }
    }

    fn schedule(&mut self, idx: u32, after: (f64, u32)) {
        let sys = self.sys;
        let id = self.clock_id(idx);
        let slot = self.slots.entry(idx).or_insert_with(|| ClockSlot { cursor: sys.cursor(id), scheduled: false });
        if slot.scheduled {
            return;
        }
        while let Some(s) = slot.cursor.next_source_time() {
            let key = self.tm.order_key(s);
            if key.total_cmp(&after.0).then(idx.cmp(&after.1)) == Ordering::Greater {
                slot.scheduled = true;
                self.heap.push(Reverse(Pending { key, idx, source: s }));
                return;
            }
        }
    }

    fn relevant(&self, idx: u32) -> bool {
        let site = (idx / self.slots_per_site) as usize;
        let slot = idx % self.slots_per_site;
        if self.occ[site] {
            return true;
        }
        if slot == 0 {
            return false;
        }
        let tip = self.bi.site(site) + Site::unit((slot - 1) as usize);
        self.bi.index(tip).is_some_and(|j| self.occ[j])
    }

    /// Processes events up to view time `t_end` and returns the next
    /// effective one, or `None` when nothing changes before `t_end`.
    pub fn step(&mut self, t_end: f64) -> Option<LoggedEvent> {
        while let Some(&Reverse(p)) = self.heap.peek() {
            let time = self.tm.view_time(p.source);
            if time > t_end {
                return None;
            }
            self.heap.pop();
            if let Some(slot) = self.slots.get_mut(&p.idx) {
                slot.scheduled = false;
            }
            let sps = self.slots_per_site;
            let site = (p.idx / sps) as usize;
            let slot = p.idx % sps;
            let mut logged = None;
            if slot == 0 {
                if self.occ[site] {
                    self.occ[site] = false;
                    self.count -= 1;
                    logged = Some(LoggedEvent {
                        time,
                        source_time: p.source,
                        clock: self.clock_id(p.idx),
                        kind: EventKind::Death,
                        site: self.bi.site(site),
                        parent: None,
                        delta: -1,
                    });
                }
            } else {
                let base = self.bi.site(site);
                let tip = base + Site::unit((slot - 1) as usize);
                let j = self.bi.index(tip).expect("edge clocks are scheduled inside the window");
                let (a, b) = (self.occ[site], self.occ[j]);
                if a != b {
                    let (target, parent) = if a { (j, base) } else { (site, tip) };
                    self.occupy(target, (p.key, p.idx));
                    logged = Some(LoggedEvent {
                        time,
                        source_time: p.source,
                        clock: self.clock_id(p.idx),
                        kind: EventKind::Infection,
                        site: self.bi.site(target),
                        parent: Some(parent),
                        delta: 1,
                    });
                }
            }
            if self.relevant(p.idx) {
                self.schedule(p.idx, (p.key, p.idx));
            }
            if let Some(e) = logged {
                self.now = time;
                if self.count == 0 {
                    self.extinct_at = Some(time);
                    self.heap.clear();
                }
                return Some(e);
            }
        }
        None
    }

    /// Runs to `t_end` discarding the log.
    pub fn run_to(&mut self, t_end: f64) {
        while self.step(t_end).is_some() {}
    }
}

fn check_t_end(sys: &HarrisSystem, t_end: f64) -> Result<()> {
    if !(0.0..=sys.t_max()).contains(&t_end) {
        return Err(Error::InvalidArgument(format!("t_end {t_end} outside [0, {}]", sys.t_max())));
    }
    Ok(())
}

/// `ξ^A` on `[0, t_end]`.
pub fn evolve(sys: &HarrisSystem, a: &Configuration, t_end: f64) -> Result<Trajectory> {
    check_t_end(sys, t_end)?;
    let mut ev = Evolver::new(sys, a)?;
    let mut events = Vec::new();
    while let Some(e) = ev.step(t_end) {
        events.push(e);
    }
    Ok(Trajectory {
        initial: a.clone(),
        events,
        final_time: t_end,
        final_state: ev.occupied(),
        boundary_contaminated: ev.contaminated(),
        extinct_at: ev.extinct_at(),
    })
}

/// Outcome of a run that only asks whether the process is alive at the end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Survival {
    pub alive: bool,
    pub extinct_at: Option<f64>,
    pub contaminated: bool,
}

pub fn survives(sys: &HarrisSystem, a: &Configuration, t_end: f64) -> Result<Survival> {
    check_t_end(sys, t_end)?;
    let mut ev = Evolver::new(sys, a)?;
    ev.run_to(t_end);
    Ok(Survival { alive: ev.count() > 0, extinct_at: ev.extinct_at(), contaminated: ev.contaminated() })
}

/// First time `x` is occupied by `ξ^A`, stopping as soon as it is.
pub fn first_hit(sys: &HarrisSystem, a: &Configuration, x: Site, t_end: f64) -> Result<(Option<f64>, bool)> {
    check_t_end(sys, t_end)?;
    if a.contains(x) {
        return Ok((Some(0.0), Evolver::new(sys, a)?.contaminated()));
    }
    let mut ev = Evolver::new(sys, a)?;
    while let Some(e) = ev.step(t_end) {
        if e.site == x && e.delta > 0 {
            return Ok((Some(e.time), ev.contaminated()));
        }
    }
    Ok((None, ev.contaminated()))
}

/// `ξ^{x}_{horizon - s} ∘ θ_s ≠ ∅`.
pub fn progeny_alive(sys: &HarrisSystem, x: Site, s: f64, horizon: f64) -> Result<bool> {
    Ok(progeny_survival(sys, x, s, horizon)?.alive)
}

fn progeny_survival(sys: &HarrisSystem, x: Site, s: f64, horizon: f64) -> Result<Survival> {
    if !(s <= horizon && horizon <= sys.t_max()) {
        return Err(Error::InvalidArgument(format!("need s <= horizon <= t_max, got {s}, {horizon}")));
    }
    if horizon == s {
        return Ok(Survival { alive: true, extinct_at: None, contaminated: false });
    }
    let shifted = sys.time_shift(s)?;
    survives(&shifted, &Configuration::singleton(x), horizon - s)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CouplingTime {
    /// Last time the two processes disagreed at `x`; `None` if they still
    /// disagree at `t_max`.
    pub time: Option<f64>,
    pub censored: bool,
    /// The run from `{0}` touched the window boundary.
    pub contaminated: bool,
}

/// `t'(x)` with `ξ^{B_R}` standing in for the process from the full lattice.
pub fn coupling_time(sys: &HarrisSystem, x: Site) -> Result<CouplingTime> {
    let t_max = sys.t_max();
    let from0 = evolve(sys, &Configuration::singleton(Site::ORIGIN), t_max)?;
    let full = evolve(sys, &Configuration::full(sys.dim(), sys.window().radius), t_max)?;
    let mut changes: Vec<(f64, u8, bool)> = Vec::new();
    for (k, tr) in [&from0, &full].iter().enumerate() {
        for e in tr.events.iter().filter(|e| e.site == x) {
            changes.push((e.time, k as u8, e.delta > 0));
        }
    }
    changes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut state = [from0.initial.contains(x), full.initial.contains(x)];
    let mut last = if state[0] == state[1] { Some(0.0) } else { None };
    let mut i = 0;
    while i < changes.len() {
        let t = changes[i].0;
        let was = state[0] == state[1];
        while i < changes.len() && changes[i].0 == t {
            state[changes[i].1 as usize] = changes[i].2;
            i += 1;
        }
        let now = state[0] == state[1];
        if now && !was {
            last = Some(t);
        } else if !now {
            last = None;
        }
    }
    Ok(CouplingTime {
        time: last,
        censored: last.is_none() || from0.boundary_contaminated,
        contaminated: from0.boundary_contaminated,
    })
}

/// `H_t`, `G_t` and the windowed coupled region `K'_t` at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct SetSnapshots {
    pub t: f64,
    pub hit: Configuration,
    pub essential: Configuration,
    /// Sites of `H_t` whose essential hitting time is censored.
    pub essential_censored: usize,
    /// Agreement checked on `[t, t_max]` only, so this over-approximates.
    pub coupled: Configuration,
    pub coupled_is_upper_approximation: bool,
    pub contaminated: bool,
}

pub fn snapshots(sys: &HarrisSystem, t: f64, progeny_window: f64) -> Result<SetSnapshots> {
    check_t_end(sys, t)?;
    let t_max = sys.t_max();
    let from0 = evolve(sys, &Configuration::singleton(Site::ORIGIN), t_max)?;
    let hit = from0.ever_occupied(t);
    let mut essential = Vec::new();
    let mut essential_censored = 0;
    for &x in hit.sites() {
        let rec = crate::regeneration::essential_hitting(sys, x, progeny_window)?;
        match rec.sigma {
            Some(s) if s <= t => essential.push(x),
            Some(_) => {}
            None => essential_censored += 1,
        }
    }
    let full = evolve(sys, &Configuration::full(sys.dim(), sys.window().radius), t_max)?;
    let a = from0.state_at(t);
    let b = full.state_at(t);
    let mut disagree: FxHashMap<Site, ()> = FxHashMap::default();
    for &z in a.sites().iter().chain(b.sites()) {
        if a.contains(z) != b.contains(z) {
            disagree.insert(z, ());
        }
    }
    let mut sa: FxHashMap<Site, bool> = a.sites().iter().map(|&z| (z, true)).collect();
    let mut sb: FxHashMap<Site, bool> = b.sites().iter().map(|&z| (z, true)).collect();
    let mut ea = from0.events.iter().filter(|e| e.time > t).peekable();
    let mut eb = full.events.iter().filter(|e| e.time > t).peekable();
    loop {
        let ta = ea.peek().map(|e| e.time);
        let tb = eb.peek().map(|e| e.time);
        let now = match (ta, tb) {
            (None, None) => break,
            (Some(x), None) => x,
            (None, Some(y)) => y,
            (Some(x), Some(y)) => x.min(y),
        };
        let mut touched = Vec::new();
        while let Some(e) = ea.next_if(|e| e.time == now) {
            sa.insert(e.site, e.delta > 0);
            touched.push(e.site);
        }
        while let Some(e) = eb.next_if(|e| e.time == now) {
            sb.insert(e.site, e.delta > 0);
            touched.push(e.site);
        }
        for z in touched {
            if sa.get(&z).copied().unwrap_or(false) != sb.get(&z).copied().unwrap_or(false) {
                disagree.insert(z, ());
            }
        }
    }
    let coupled = Configuration::new(
        BoxIndex::new(sys.dim(), sys.window().radius).sites().filter(|z| !disagree.contains_key(z)),
    );
    Ok(SetSnapshots {
        t,
        hit,
        essential: Configuration::new(essential),
        essential_censored,
        coupled,
        coupled_is_upper_approximation: true,
        contaminated: from0.boundary_contaminated,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DualReport {
    pub forward: Estimate,
    pub dual: Estimate,
    /// Replicas whose forward and reversed answers differ on the same
    /// clocks; duality is pathwise, so this should be zero.
    pub pathwise_mismatches: usize,
}

const SALT_FORWARD: u32 = 0xD0A1;
const SALT_DUAL: u32 = 0xD0A2;

/// Estimates `P(x ∈ ξ^A_t)` forward and through the reversed system started
/// from `{x}`, on independent replica sets.
pub fn dual_hit_probability(
    env: &Environment,
    window: Window,
    a: &Configuration,
    x: Site,
    t: f64,
    replicas: usize,
    seed: u64,
) -> Result<DualReport> {
    if !(0.0..=window.t_max).contains(&t) {
        return Err(Error::InvalidArgument(format!("t {t} outside [0, {}]", window.t_max)));
    }
    let rows: Vec<Result<(bool, bool, bool)>> = (0..replicas as u64)
        .into_par_iter()
        .map(|i| {
            let fwd_sys = HarrisSystem::new(env, window, replica_seed(seed, SALT_FORWARD, i));
            let dual_sys = HarrisSystem::new(env, window, replica_seed(seed, SALT_DUAL, i));
            let fwd = forward_hit(&fwd_sys, a, x, t)?;
            let dual = dual_hit(&dual_sys, a, x, t)?;
            let check = dual_hit(&fwd_sys, a, x, t)?;
            Ok((fwd, dual, fwd != check))
        })
        .collect();
    let mut kf = 0;
    let mut kd = 0;
    let mut mism = 0;
    for r in rows {
        let (f, d, m) = r?;
        kf += usize::from(f);
        kd += usize::from(d);
        mism += usize::from(m);
    }
    let (pf, sf) = binomial(kf, replicas);
    let (pd, sd) = binomial(kd, replicas);
    Ok(DualReport {
        forward: Estimate::new(pf, sf, replicas),
        dual: Estimate::new(pd, sd, replicas),
        pathwise_mismatches: mism,
    })
}

fn forward_hit(sys: &HarrisSystem, a: &Configuration, x: Site, t: f64) -> Result<bool> {
    let mut ev = Evolver::new(sys, a)?;
    ev.run_to(t);
    Ok(ev.is_occupied(x))
}

fn dual_hit(sys: &HarrisSystem, a: &Configuration, x: Site, t: f64) -> Result<bool> {
    if t == 0.0 {
        return Ok(a.contains(x));
    }
    let rev = sys.reverse(t)?;
    let mut ev = Evolver::new(&rev, &Configuration::singleton(x))?;
    ev.run_to(t);
    Ok(a.sites().iter().any(|&z| ev.is_occupied(z)))
}

/// Lebesgue measure of the times `s ∈ [0, t]` at which `x` is occupied by
/// `ξ^0` with progeny alive at `horizon`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProgenyMeasure {
    pub measure: f64,
    /// Total occupation time of `x` on `[0, t]`.
    pub occupation: f64,
    pub contaminated: bool,
}

/// Direct computation: inside a death-free occupation interval of `x` the
/// progeny of `(x, s)` only changes when an infection arrow touches `x`,
/// and survival is a down-set in `s`, so a binary search over those arrow
/// times is exact.
pub fn infinite_progeny_measure(sys: &HarrisSystem, x: Site, t: f64, horizon: f64) -> Result<ProgenyMeasure> {
    if !(t <= horizon && horizon <= sys.t_max()) {
        return Err(Error::InvalidArgument(format!("need t <= horizon <= t_max, got {t}, {horizon}")));
    }
    let traj = evolve(sys, &Configuration::singleton(Site::ORIGIN), t)?;
    let mut contaminated = traj.boundary_contaminated;
    let intervals = traj.occupancy_intervals(x);
    if intervals.is_empty() {
        return Ok(ProgenyMeasure { measure: 0.0, occupation: 0.0, contaminated });
    }
    let mut arrows = Vec::new();
    for dir in 0..sys.dim() {
        let u = Site::unit(dir);
        for e in [Edge::new(x, dir), Edge::new(x - u, dir)] {
            if sys.window().contains(e.base) && sys.window().contains(e.tip()) {
                arrows.extend(sys.stream(ClockId::edge(e)).times.into_iter().filter(|&s| s <= t));
            }
        }
    }
    arrows.sort_by(f64::total_cmp);
    let mut measure = 0.0;
    let mut occupation = 0.0;
    for (a, b) in intervals {
        occupation += b - a;
        let mut cuts = vec![a];
        cuts.extend(arrows.iter().copied().filter(|&s| s > a && s < b));
        cuts.push(b);
        cuts.dedup();
        // alive(i): survival from inside (cuts[i], cuts[i+1]), non-increasing in i.
        let mut alive = |i: usize| -> Result<bool> {
            let mid = 0.5 * (cuts[i] + cuts[i + 1]);
            let s = progeny_survival(sys, x, mid, horizon)?;
            contaminated |= s.contaminated;
            Ok(s.alive)
        };
        let pieces = cuts.len() - 1;
        let (mut lo, mut hi) = (0usize, pieces);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if alive(mid)? {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        measure += cuts[lo] - a;
    }
    Ok(ProgenyMeasure { measure, occupation, contaminated })
}

/// Same quantity through one reversed run from the whole window started at
/// `horizon`: `(x, s)` has progeny alive at `horizon` inside the window iff
/// the reversed process reaches `x` at reversed time `horizon - s`.
pub fn infinite_progeny_measure_dual(sys: &HarrisSystem, x: Site, t: f64, horizon: f64) -> Result<ProgenyMeasure> {
    let m = infinite_progeny_measures_dual(sys, x, &[t], horizon)?;
    Ok(m[0])
}

/// [`infinite_progeny_measure_dual`] for several `t` sharing one reversed run.
pub fn infinite_progeny_measures_dual(
    sys: &HarrisSystem,
    x: Site,
    ts: &[f64],
    horizon: f64,
) -> Result<Vec<ProgenyMeasure>> {
    let t_top = ts.iter().copied().fold(0.0, f64::max);
    if !(t_top <= horizon && horizon <= sys.t_max() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("need t <= horizon <= t_max, got {t_top}, {horizon}")));
    }
    let traj = evolve(sys, &Configuration::singleton(Site::ORIGIN), t_top)?;
    let occ = traj.occupancy_intervals(x);
    let alive = alive_at_horizon_intervals(sys, x, horizon)?;
    Ok(ts
        .iter()
        .map(|&t| {
            let clipped: Vec<(f64, f64)> = occ.iter().map(|&(a, b)| (a.min(t), b.min(t))).collect();
            ProgenyMeasure {
                measure: intersection(&clipped, &alive).iter().map(|(a, b)| b - a).sum(),
                occupation: clipped.iter().map(|(a, b)| b - a).sum(),
                contaminated: traj.boundary_contaminated,
            }
        })
        .collect())
}

/// Times `s ∈ [0, horizon]` at which `(x, s)` has progeny alive at `horizon`
/// inside the window, as disjoint intervals.
fn alive_at_horizon_intervals(sys: &HarrisSystem, x: Site, horizon: f64) -> Result<Vec<(f64, f64)>> {
    let rev = sys.reverse(horizon)?;
    let back = evolve(&rev, &Configuration::full(sys.dim(), sys.window().radius), horizon)?;
    let mut v: Vec<(f64, f64)> =
        back.occupancy_intervals(x).into_iter().map(|(r1, r2)| (horizon - r2, horizon - r1)).collect();
    v.reverse();
    Ok(v)
}

fn intersection(a: &[(f64, f64)], b: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(a0, a1) in a {
        for &(b0, b1) in b {
            let lo = a0.max(b0);
            let hi = a1.min(b1);
            if hi > lo {
                out.push((lo, hi));
            }
        }
    }
    out.sort_by(|p, q| p.0.total_cmp(&q.0));
    out
}

/// Intervals of `[0, horizon]` on which `x ∈ ξ⁰` and the progeny of `x` is
/// alive at `horizon`.
pub fn immortal_occupancy_intervals(sys: &HarrisSystem, x: Site, horizon: f64) -> Result<Vec<(f64, f64)>> {
    let traj = evolve(sys, &Configuration::singleton(Site::ORIGIN), horizon)?;
    let alive = alive_at_horizon_intervals(sys, x, horizon)?;
    Ok(intersection(&traj.occupancy_intervals(x), &alive))
}
