//! Harris graphical construction on a finite space-time window.
//!
//! A [`HarrisSystem`] is a *view* on a clock source: a spatial offset, a time
//! origin and an orientation. Time shifts, space shifts and time reversal
//! only change the view, so every consumer reads the same Poisson clocks.
//!
//! Clock streams of a seeded source are generated lazily from a keyed
//! ChaCha8 stream per clock; materialising `[0, T₁]` and later `[0, T₂]`
//! yields the same prefix.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::sync::Arc;

use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::lattice::{BoxIndex, Edge, Site, Window, MAX_DIM};
use crate::rng::{keyed_stream, Purpose};

/// Death clock of a site or infection clock of the edge `{site, site + e_dir}`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum ClockKind {
    Death,
    Edge(u8),
}

impl ClockKind {
    fn slot(self) -> u32 {
        match self {
            ClockKind::Death => 0,
            ClockKind::Edge(d) => 1 + u32::from(d),
        }
    }

    fn from_slot(slot: u32) -> ClockKind {
        if slot == 0 {
            ClockKind::Death
        } else {
            ClockKind::Edge((slot - 1) as u8)
        }
    }
}

/// Identifier of one Poisson clock.
///
/// The total order compares sites lexicographically from the highest
/// coordinate down, then the kind (death before edges). It is translation
/// invariant and coincides with the dense window index order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct ClockId {
    pub site: Site,
    pub kind: ClockKind,
}

impl ClockId {
    pub fn death(site: Site) -> ClockId {
        ClockId { site, kind: ClockKind::Death }
    }

    pub fn edge(e: Edge) -> ClockId {
        ClockId { site: e.base, kind: ClockKind::Edge(e.dir) }
    }

    pub fn as_edge(&self) -> Option<Edge> {
        match self.kind {
            ClockKind::Death => None,
            ClockKind::Edge(d) => Some(Edge::new(self.site, d as usize)),
        }
    }

    pub fn translated(&self, x: Site) -> ClockId {
        ClockId { site: self.site + x, kind: self.kind }
    }
}

impl Ord for ClockId {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..MAX_DIM).rev() {
            match self.site.0[i].cmp(&other.site.0[i]) {
                Ordering::Equal => {}
                o => return o,
            }
        }
        self.kind.slot().cmp(&other.kind.slot())
    }
}

impl PartialOrd for ClockId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Materialised event list of one clock on `[0, t_max]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ClockStream {
    pub id: ClockId,
    pub rate: f64,
    pub times: Vec<f64>,
}

enum Source {
    Poisson { seed: u64 },
    Explicit { streams: BTreeMap<ClockId, Arc<Vec<f64>>> },
    /// Clocks outside the L∞ ball `keep` are redrawn from `seed`.
    Resampled { inner: Arc<Source>, keep_center: Site, keep_radius: i64, seed: u64 },
}

impl Source {
    fn base_cursor(&self, env: &Environment, c: ClockId) -> BaseCursor {
        match self {
            Source::Poisson { seed } => BaseCursor::poisson(*seed, c, clock_rate(env, c)),
            Source::Explicit { streams } => match streams.get(&c) {
                Some(t) => BaseCursor::List { times: Arc::clone(t), pos: 0 },
                None => BaseCursor::Empty,
            },
            Source::Resampled { inner, keep_center, keep_radius, seed } => {
                let inside = |z: Site| (z - *keep_center).norm_inf() <= *keep_radius;
                let kept = match c.as_edge() {
                    None => inside(c.site),
                    Some(e) => inside(e.base) || inside(e.tip()),
                };
                if kept {
                    inner.base_cursor(env, c)
                } else {
                    BaseCursor::poisson(*seed, c, clock_rate(env, c))
                }
            }
        }
    }
}

fn clock_rate(env: &Environment, c: ClockId) -> f64 {
    match c.as_edge() {
        None => 1.0,
        Some(e) => env.rate(e),
    }
}

pub(crate) enum BaseCursor {
    Poisson { rng: Box<ChaCha8Rng>, rate: f64, t: f64 },
    List { times: Arc<Vec<f64>>, pos: usize },
    Empty,
}

impl BaseCursor {
    fn poisson(seed: u64, c: ClockId, rate: f64) -> BaseCursor {
        if rate <= 0.0 {
            return BaseCursor::Empty;
        }
        let rng = keyed_stream(seed, Purpose::Clock, c.kind.slot(), c.site);
        BaseCursor::Poisson { rng: Box::new(rng), rate, t: 0.0 }
    }

    fn next(&mut self) -> Option<f64> {
        match self {
            BaseCursor::Poisson { rng, rate, t } => {
                let e: f64 = Exp1.sample(rng.as_mut());
                *t += e / *rate;
                Some(*t)
            }
            BaseCursor::List { times, pos } => {
                let v = times.get(*pos).copied();
                *pos += 1;
                v
            }
            BaseCursor::Empty => None,
        }
    }
}

/// Iterator over the source times of one clock, in view order, restricted
/// to view times in `[0, horizon]`.
pub(crate) enum ViewCursor {
    Forward { base: BaseCursor, origin: f64, horizon: f64, done: bool },
    Listed { times: Vec<f64>, pos: usize },
}

impl ViewCursor {
    pub(crate) fn next_source_time(&mut self) -> Option<f64> {
        match self {
            ViewCursor::Forward { base, origin, horizon, done } => {
                if *done {
                    return None;
                }
                loop {
                    let Some(s) = base.next() else {
                        *done = true;
                        return None;
                    };
                    if s < *origin {
                        continue;
                    }
                    if s - *origin > *horizon {
                        *done = true;
                        return None;
                    }
                    return Some(s);
                }
            }
            ViewCursor::Listed { times, pos } => {
                let v = times.get(*pos).copied();
                *pos += 1;
                v
            }
        }
    }
}

/// View time map: view time `τ` reads source time `origin + τ` (forward) or
/// `origin - τ` (reversed).
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct TimeMap {
    pub reversed: bool,
    pub origin: f64,
}

impl TimeMap {
    #[inline]
    pub(crate) fn view_time(&self, s: f64) -> f64 {
        if self.reversed {
            self.origin - s
        } else {
            s - self.origin
        }
    }

    #[inline]
    pub(crate) fn source_time(&self, tau: f64) -> f64 {
        if self.reversed {
            self.origin - tau
        } else {
            self.origin + tau
        }
    }

    /// Monotone key in view order, exact for ties.
    #[inline]
    pub(crate) fn order_key(&self, s: f64) -> f64 {
        if self.reversed {
            -s
        } else {
            s
        }
    }
}

/// The Poisson clock system on a space-time window, seen through a view.
#[derive(Clone)]
pub struct HarrisSystem {
    source: Arc<Source>,
    env: Environment,
    window: Window,
    offset: Site,
    time: TimeMap,
}

impl std::fmt::Debug for HarrisSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HarrisSystem")
            .field("window", &self.window)
            .field("offset", &self.offset)
            .field("time", &self.time)
            .finish()
    }
}

impl HarrisSystem {
    /// Seeded system; every clock is an independent keyed Poisson stream.
    pub fn new(env: &Environment, window: Window, seed: u64) -> HarrisSystem {
        HarrisSystem {
            source: Arc::new(Source::Poisson { seed }),
            env: env.translate(-env.origin_offset()),
            window,
            offset: env.origin_offset(),
            time: TimeMap { reversed: false, origin: 0.0 },
        }
    }

    /// Hand-built system: the listed clocks carry the given events, all
    /// others are empty.
    pub fn from_streams<I>(env: &Environment, window: Window, streams: I) -> Result<HarrisSystem>
    where
        I: IntoIterator<Item = (ClockId, Vec<f64>)>,
    {
        let mut map = BTreeMap::new();
        for (id, times) in streams {
            if times.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!("clock {id:?}: times not strictly increasing")));
            }
            if times.iter().any(|&t| !(0.0..=window.t_max).contains(&t)) {
                return Err(Error::InvalidArgument(format!("clock {id:?}: time outside [0, t_max]")));
            }
            map.insert(id.translated(env.origin_offset()), Arc::new(times));
        }
        Ok(HarrisSystem {
            source: Arc::new(Source::Explicit { streams: map }),
            env: env.translate(-env.origin_offset()),
            window,
            offset: env.origin_offset(),
            time: TimeMap { reversed: false, origin: 0.0 },
        })
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn t_max(&self) -> f64 {
        self.window.t_max
    }

    pub fn dim(&self) -> usize {
        self.env.dim()
    }

    /// Environment seen from this view's origin.
    pub fn environment(&self) -> Environment {
        self.env.translate(self.offset)
    }

    pub fn is_reversed(&self) -> bool {
        self.time.reversed
    }

    pub(crate) fn time_map(&self) -> TimeMap {
        self.time
    }

    pub fn rate(&self, c: ClockId) -> f64 {
        clock_rate(&self.env, c.translated(self.offset))
    }

    /// `θ_t`: events on `[t, t_max]` moved to `[0, t_max - t]`.
    pub fn time_shift(&self, t: f64) -> Result<HarrisSystem> {
        if !(0.0..=self.window.t_max).contains(&t) {
            return Err(Error::InvalidArgument(format!("time shift {t} outside [0, {}]", self.window.t_max)));
        }
        let origin = if self.time.reversed { self.time.origin - t } else { self.time.origin + t };
        Ok(HarrisSystem {
            window: Window { radius: self.window.radius, t_max: self.window.t_max - t },
            time: TimeMap { origin, ..self.time },
            ..self.clone()
        })
    }

    /// `T_x`: the clock of site `z` becomes the clock of `x + z`.
    pub fn space_shift(&self, x: Site) -> HarrisSystem {
        HarrisSystem { offset: self.offset + x, ..self.clone() }
    }

    /// Time reversal on `[0, t0]`: an event at `s` moves to `t0 - s`.
    pub fn reverse(&self, t0: f64) -> Result<HarrisSystem> {
        if !(t0 > 0.0 && t0 <= self.window.t_max) {
            return Err(Error::InvalidArgument(format!("reversal time {t0} outside (0, {}]", self.window.t_max)));
        }
        let origin = if self.time.reversed { self.time.origin - t0 } else { self.time.origin + t0 };
        Ok(HarrisSystem {
            window: Window { radius: self.window.radius, t_max: t0 },
            time: TimeMap { reversed: !self.time.reversed, origin },
            ..self.clone()
        })
    }

    /// Same clocks, smaller or larger spatial window.
    pub fn with_radius(&self, radius: u32) -> HarrisSystem {
        HarrisSystem { window: Window { radius, t_max: self.window.t_max }, ..self.clone() }
    }

    /// Redraws every clock that lies outside `center + [-radius, radius]^d`
    /// (edges: both endpoints outside) from an independent seed.
    pub fn resample_outside(&self, center: Site, radius: i64, seed: u64) -> HarrisSystem {
        HarrisSystem {
            source: Arc::new(Source::Resampled {
                inner: Arc::clone(&self.source),
                keep_center: center + self.offset,
                keep_radius: radius,
                seed,
            }),
            ..self.clone()
        }
    }

    pub(crate) fn cursor(&self, c: ClockId) -> ViewCursor {
        let base = self.source.base_cursor(&self.env, c.translated(self.offset));
        let horizon = self.window.t_max;
        if !self.time.reversed {
            return ViewCursor::Forward { base, origin: self.time.origin, horizon, done: false };
        }
        // Reversed views are finite: read source times in
        // [origin - horizon, origin] and play them backwards.
        let lo = self.time.origin - horizon;
        let mut fwd = ViewCursor::Forward { base, origin: lo.max(0.0), horizon: f64::INFINITY, done: false };
        let mut times = Vec::new();
        while let Some(s) = fwd.next_source_time() {
            if s > self.time.origin {
                break;
            }
            if self.time.origin - s <= horizon {
                times.push(s);
            }
        }
        times.reverse();
        ViewCursor::Listed { times, pos: 0 }
    }

    /// Event times of clock `c` in view time, ascending, on `[0, t_max]`.
    pub fn stream(&self, c: ClockId) -> ClockStream {
        let mut cur = self.cursor(c);
        let mut times = Vec::new();
        while let Some(s) = cur.next_source_time() {
            times.push(self.time.view_time(s));
        }
        ClockStream { id: c, rate: self.rate(c), times }
    }

    /// Every clock of the window: deaths of `B_R` and edges inside `B_R`,
    /// in clock order.
    pub fn clocks_in_window(&self) -> Vec<ClockId> {
        let bi = BoxIndex::new(self.dim(), self.window.radius);
        let mut out = Vec::new();
        for z in bi.sites() {
            out.push(ClockId::death(z));
            for dir in 0..self.dim() {
                let e = Edge::new(z, dir);
                if bi.contains(e.tip()) {
                    out.push(ClockId::edge(e));
                }
            }
        }
        out
    }

    /// Writes the window's event lists in the little-endian dump format
    /// described in `docs/harris-dump.md`.
    pub fn write_dump<W: Write>(&self, mut w: W) -> Result<()> {
        let clocks = self.clocks_in_window();
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.dim() as u32).to_le_bytes())?;
        w.write_all(&self.window.radius.to_le_bytes())?;
        w.write_all(&self.window.t_max.to_le_bytes())?;
        w.write_all(&(clocks.len() as u64).to_le_bytes())?;
        for c in clocks {
            let s = self.stream(c);
            w.write_all(&[c.kind.slot() as u8])?;
            for &v in c.site.coords(self.dim()) {
                w.write_all(&v.to_le_bytes())?;
            }
            w.write_all(&(s.times.len() as u64).to_le_bytes())?;
            for t in s.times {
                w.write_all(&t.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a dump back as a hand-built system over `env`.
    pub fn read_dump<R: Read>(env: &Environment, mut r: R) -> Result<HarrisSystem> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::Dump("bad magic".into()));
        }
        let dim = read_u32(&mut r)? as usize;
        if dim != env.dim() {
            return Err(Error::Dump(format!("dump dimension {dim} does not match environment {}", env.dim())));
        }
        let radius = read_u32(&mut r)?;
        let t_max = f64::from_le_bytes(read_array(&mut r)?);
        let count = u64::from_le_bytes(read_array(&mut r)?);
        let mut streams = Vec::new();
        for _ in 0..count {
            let [slot] = read_array::<1, _>(&mut r)?;
            let mut coords = [0i32; MAX_DIM];
            for v in coords.iter_mut().take(dim) {
                *v = i32::from_le_bytes(read_array(&mut r)?);
            }
            let n = u64::from_le_bytes(read_array(&mut r)?);
            let mut times = Vec::with_capacity(n as usize);
            for _ in 0..n {
                times.push(f64::from_le_bytes(read_array(&mut r)?));
            }
            streams.push((ClockId { site: Site(coords), kind: ClockKind::from_slot(u32::from(slot)) }, times));
        }
        let window = Window::new(radius, t_max)?;
        HarrisSystem::from_streams(env, window, streams)
    }
}

const DUMP_MAGIC: &[u8; 8] = b"HARRIS01";

fn read_array<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    Ok(u32::from_le_bytes(read_array(r)?))
}

/// Builds a seeded system.
pub fn new_system(env: &Environment, window: Window, seed: u64) -> HarrisSystem {
    HarrisSystem::new(env, window, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{sample_environment, EnvironmentSpec};

    fn env1(rate: f64) -> Environment {
        sample_environment(&EnvironmentSpec::dirac(rate, 1), &Window::new(10, 1.0).unwrap(), 0).unwrap()
    }

    fn hand(times: Vec<f64>) -> HarrisSystem {
        let w = Window::new(3, 5.0).unwrap();
        HarrisSystem::from_streams(&env1(2.0), w, [(ClockId::death(Site::ORIGIN), times)]).unwrap()
    }

    #[test]
    fn time_shift_drops_and_translates() {
        let sys = hand(vec![0.5, 1.2, 3.0]);
        let s = sys.time_shift(1.0).unwrap();
        let times = s.stream(ClockId::death(Site::ORIGIN)).times;
        assert_eq!(times.len(), 2);
        assert!((times[0] - 0.2).abs() < 1e-15 && (times[1] - 2.0).abs() < 1e-15);
        assert_eq!(sys.time_shift(0.0).unwrap().stream(ClockId::death(Site::ORIGIN)).times, vec![0.5, 1.2, 3.0]);
        assert!(sys.time_shift(6.0).is_err());
        assert!(sys.time_shift(-1.0).is_err());
    }

    #[test]
    fn reversal_reflects() {
        let sys = hand(vec![0.3, 0.9, 2.0]);
        let r = sys.reverse(1.0).unwrap();
        let t = r.stream(ClockId::death(Site::ORIGIN)).times;
        assert_eq!(t.len(), 2);
        assert!((t[0] - 0.1).abs() < 1e-15 && (t[1] - 0.7).abs() < 1e-15);
        let back = r.reverse(1.0).unwrap().stream(ClockId::death(Site::ORIGIN)).times;
        assert_eq!(back, vec![0.3, 0.9]);
        assert!(hand(vec![]).reverse(1.0).unwrap().stream(ClockId::death(Site::ORIGIN)).times.is_empty());
        assert!(sys.reverse(0.0).is_err());
    }

    #[test]
    fn zero_rate_clock_is_empty() {
        let mut c = BaseCursor::poisson(3, ClockId::death(Site::ORIGIN), 0.0);
        assert!(c.next().is_none());
        let mut c = BaseCursor::poisson(3, ClockId::death(Site::ORIGIN), 1.0);
        assert!(c.next().is_some());
    }

    #[test]
    fn death_stream_count_within_poisson_band() {
        let sys = HarrisSystem::new(&env1(2.0), Window::new(2, 1.0e4).unwrap(), 17);
        let n = sys.stream(ClockId::death(Site::ORIGIN)).times.len() as f64;
        assert!((n - 1.0e4).abs() < 3.0 * 100.0, "count {n}");
    }

    #[test]
    fn same_seed_same_events() {
        let a = HarrisSystem::new(&env1(2.0), Window::new(2, 10.0).unwrap(), 5);
        let b = HarrisSystem::new(&env1(2.0), Window::new(2, 10.0).unwrap(), 5);
        for c in a.clocks_in_window() {
            assert_eq!(a.stream(c), b.stream(c));
        }
    }

    #[test]
    fn lazy_extension_is_a_prefix() {
        let short = HarrisSystem::new(&env1(2.0), Window::new(2, 3.0).unwrap(), 8);
        let long = HarrisSystem::new(&env1(2.0), Window::new(2, 30.0).unwrap(), 8);
        for c in short.clocks_in_window() {
            let a = short.stream(c).times;
            let b = long.stream(c).times;
            assert_eq!(&b[..a.len()], &a[..]);
            assert!(b.get(a.len()).map_or(true, |&t| t > 3.0));
        }
    }

    #[test]
    fn shifts_commute_and_compose() {
        let sys = HarrisSystem::new(&env1(2.0), Window::new(4, 10.0).unwrap(), 21);
        let x = Site::new(&[2]);
        let y = Site::new(&[-3]);
        let a = sys.space_shift(x).time_shift(1.5).unwrap();
        let b = sys.time_shift(1.5).unwrap().space_shift(x);
        let c = sys.space_shift(x).space_shift(y);
        let d = sys.space_shift(x + y);
        let e = sys.time_shift(1.0).unwrap().time_shift(2.5).unwrap();
        let f = sys.time_shift(3.5).unwrap();
        for id in a.clocks_in_window() {
            assert_eq!(a.stream(id), b.stream(id));
            assert_eq!(c.stream(id), d.stream(id));
            assert_eq!(e.stream(id), f.stream(id));
            assert_eq!(sys.space_shift(x).stream(id).times, sys.stream(id.translated(x)).times);
        }
    }

    #[test]
    fn dump_round_trip() {
        let env = env1(1.5);
        let sys = HarrisSystem::new(&env, Window::new(2, 4.0).unwrap(), 99);
        let mut buf = Vec::new();
        sys.write_dump(&mut buf).unwrap();
        let back = HarrisSystem::read_dump(&env, &buf[..]).unwrap();
        for c in sys.clocks_in_window() {
            assert_eq!(sys.stream(c).times, back.stream(c).times);
        }
        assert!(HarrisSystem::read_dump(&env, &b"NOTADUMP"[..]).is_err());
    }

    #[test]
    fn resampling_keeps_inside_clocks() {
        let sys = HarrisSystem::new(&env1(2.0), Window::new(10, 5.0).unwrap(), 1);
        let pert = sys.resample_outside(Site::ORIGIN, 3, 777);
        assert_eq!(sys.stream(ClockId::death(Site::new(&[3]))), pert.stream(ClockId::death(Site::new(&[3]))));
        assert_eq!(
            sys.stream(ClockId::edge(Edge::new(Site::new(&[3]), 0))),
            pert.stream(ClockId::edge(Edge::new(Site::new(&[3]), 0)))
        );
        assert_ne!(sys.stream(ClockId::death(Site::new(&[5]))), pert.stream(ClockId::death(Site::new(&[5]))));
    }

    #[test]
    fn clock_order_matches_window_index() {
        let bi = BoxIndex::new(2, 3);
        let mut ids: Vec<(usize, ClockId)> = bi.sites().map(|z| (bi.index(z).unwrap(), ClockId::death(z))).collect();
        ids.sort_by(|a, b| a.1.cmp(&b.1));
        assert!(ids.windows(2).all(|w| w[0].0 < w[1].0));
    }
}
