//! Counter-based keyed random streams.
//!
//! Every random object in the crate (a Poisson clock, an environment edge,
//! an oriented-percolation bond, a replica seed) owns an independent ChaCha8
//! stream whose key is derived injectively from `(seed, purpose, kind, site)`.
//! Nothing depends on a global draw order, so any consumer can re-read the
//! same stream and enlarged windows agree with previously seen values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lattice::{Site, MAX_DIM};

/// Stream families. Distinct purposes never share a key.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u32)]
pub enum Purpose {
    Clock = 1,
    Environment = 2,
    Bond = 3,
    Replica = 4,
    Resample = 5,
    Aux = 6,
}

/// A ChaCha8 stream keyed by `(seed, purpose, kind, site)`.
pub fn keyed_stream(seed: u64, purpose: Purpose, kind: u32, site: Site) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&(purpose as u32).to_le_bytes());
    key[12..16].copy_from_slice(&kind.to_le_bytes());
    for i in 0..MAX_DIM {
        key[16 + 4 * i..20 + 4 * i].copy_from_slice(&site.0[i].to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

/// Uniform draw in `[0, 1)` attached to a single key.
pub fn keyed_uniform(seed: u64, purpose: Purpose, kind: u32, site: Site) -> f64 {
    keyed_stream(seed, purpose, kind, site).random::<f64>()
}

/// Seed of replica `index` in the family `salt`: `seed_i = f(base, salt, i)`.
pub fn replica_seed(base: u64, salt: u32, index: u64) -> u64 {
    let lo = index as u32 as i32;
    let hi = (index >> 32) as u32 as i32;
    let mut rng = keyed_stream(base, Purpose::Replica, salt, Site::new(&[lo, hi]));
    rng.random::<u64>()
}
