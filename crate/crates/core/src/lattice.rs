//! Lattice geometry on Z^d: sites, nearest-neighbour edges and the
//! L∞ boxes used as simulation windows.
//!
//! Dimensions up to [`MAX_DIM`] are supported. A [`Site`] always carries
//! `MAX_DIM` coordinates; coordinates beyond the working dimension are zero.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 4;

/// A point of Z^d.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Site(pub [i32; MAX_DIM]);

impl Site {
    pub const ORIGIN: Site = Site([0; MAX_DIM]);

    /// Builds a site from up to `MAX_DIM` coordinates.
    pub fn new(coords: &[i32]) -> Site {
        assert!(coords.len() <= MAX_DIM, "at most {MAX_DIM} coordinates");
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Site(c)
    }

    /// The unit vector e_i.
    pub fn unit(i: usize) -> Site {
        let mut c = [0; MAX_DIM];
        c[i] = 1;
        Site(c)
    }

    pub fn scaled(self, k: i32) -> Site {
        let mut c = self.0;
        for v in &mut c {
            *v *= k;
        }
        Site(c)
    }

    pub fn norm1(&self) -> i64 {
        self.0.iter().map(|&v| i64::from(v).abs()).sum()
    }

    pub fn norm_inf(&self) -> i64 {
        self.0.iter().map(|&v| i64::from(v).abs()).max().unwrap_or(0)
    }

    pub fn coords(&self, dim: usize) -> &[i32] {
        &self.0[..dim]
    }
}

impl fmt::Debug for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let last = self.0.iter().rposition(|&v| v != 0).map_or(1, |i| i + 1);
        write!(f, "(")?;
        for (i, v) in self.0[..last].iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

impl Add for Site {
    type Output = Site;
    fn add(self, rhs: Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(rhs.0) {
            *a += b;
        }
        Site(c)
    }
}

impl Sub for Site {
    type Output = Site;
    fn sub(self, rhs: Site) -> Site {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(rhs.0) {
            *a -= b;
        }
        Site(c)
    }
}

impl Neg for Site {
    type Output = Site;
    fn neg(self) -> Site {
        self.scaled(-1)
    }
}

/// Undirected nearest-neighbour edge `{base, base + e_dir}`.
///
/// The lower endpoint together with the axis is the canonical id.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Edge {
    pub base: Site,
    pub dir: u8,
}

impl Edge {
    pub fn new(base: Site, dir: usize) -> Edge {
        Edge { base, dir: dir as u8 }
    }

    /// Canonical edge between two neighbouring sites.
    pub fn between(a: Site, b: Site) -> Option<Edge> {
        let diff = b - a;
        if diff.norm1() != 1 {
            return None;
        }
        let dir = diff.0.iter().position(|&v| v != 0)?;
        if diff.0[dir] > 0 {
            Some(Edge::new(a, dir))
        } else {
            Some(Edge::new(b, dir))
        }
    }

    pub fn tip(&self) -> Site {
        self.base + Site::unit(self.dir as usize)
    }

    pub fn endpoints(&self) -> (Site, Site) {
        (self.base, self.tip())
    }

    pub fn translated(&self, x: Site) -> Edge {
        Edge { base: self.base + x, dir: self.dir }
    }
}

/// Space-time window: the L∞ box `B_R` and the time horizon `[0, t_max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub radius: u32,
    pub t_max: f64,
}

impl Window {
    pub fn new(radius: u32, t_max: f64) -> Result<Window> {
        if radius < 1 {
            return Err(Error::InvalidArgument("window radius must be at least 1".into()));
        }
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidArgument(format!("window t_max must be positive, got {t_max}")));
        }
        Ok(Window { radius, t_max })
    }

    pub fn contains(&self, z: Site) -> bool {
        z.norm_inf() <= i64::from(self.radius)
    }

    pub fn on_boundary(&self, z: Site) -> bool {
        z.norm_inf() == i64::from(self.radius)
    }
}

/// Dense indexing of the sites of `B_R` in dimension `dim`.
///
/// Index order is lexicographic in `(z_{d-1}, ..., z_0)`, which is
/// translation invariant and therefore usable as a tie-break order.
#[derive(Clone, Copy, Debug)]
pub struct BoxIndex {
    pub dim: usize,
    pub radius: i32,
    side: usize,
    len: usize,
}

impl BoxIndex {
    pub fn new(dim: usize, radius: u32) -> BoxIndex {
        assert!((1..=MAX_DIM).contains(&dim));
        let side = 2 * radius as usize + 1;
        BoxIndex { dim, radius: radius as i32, side, len: side.pow(dim as u32) }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, z: Site) -> bool {
        z.0[..self.dim].iter().all(|&v| v.abs() <= self.radius)
    }

    pub fn index(&self, z: Site) -> Option<usize> {
        if !self.contains(z) {
            return None;
        }
        let mut idx = 0usize;
        for i in (0..self.dim).rev() {
            idx = idx * self.side + (z.0[i] + self.radius) as usize;
        }
        Some(idx)
    }

    pub fn site(&self, mut idx: usize) -> Site {
        let mut c = [0; MAX_DIM];
        for v in c.iter_mut().take(self.dim) {
            *v = (idx % self.side) as i32 - self.radius;
            idx /= self.side;
        }
        Site(c)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.len).map(move |i| self.site(i))
    }
}

/// All sites of the cube `center + [-r, r]^d`.
pub fn cube(dim: usize, center: Site, r: i32) -> Vec<Site> {
    let bi = BoxIndex::new(dim, r.max(0) as u32);
    bi.sites().map(|z| z + center).collect()
}

/// All sites of the half-open cube `center + [-r, r)^d`.
pub fn half_open_cube(dim: usize, center: Site, r: i32) -> Vec<Site> {
    cube(dim, center, r)
        .into_iter()
        .filter(|z| (0..dim).all(|i| z.0[i] - center.0[i] < r))
        .collect()
}

/// Neighbours `z'` with `‖z' - z‖₁ ≤ 1` (including `z`), in a fixed order:
/// `z`, then `z - e_i`, `z + e_i` for each axis.
pub fn closed_neighbourhood(dim: usize, z: Site) -> Vec<Site> {
    let mut out = Vec::with_capacity(2 * dim + 1);
    out.push(z);
    for i in 0..dim {
        out.push(z - Site::unit(i));
        out.push(z + Site::unit(i));
    }
    out
}

/// The `2d + 1` directions `u` with `‖u‖₁ ≤ 1`, ordered as in
/// [`closed_neighbourhood`].
pub fn step_directions(dim: usize) -> Vec<Site> {
    closed_neighbourhood(dim, Site::ORIGIN)
}
