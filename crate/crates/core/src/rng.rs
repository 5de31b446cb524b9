//! Seeded random streams.
//!
//! Every random quantity is drawn from a ChaCha8 stream keyed by
//! `(master seed, purpose tag)` and selected by a stream index, so work
//! items can be executed in any order or on any thread and still see the
//! same numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SimRng = ChaCha8Rng;

/// Purpose tags keep the streams of unrelated draws apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    ScenarioMeans = 0x5ce7_a410,
    Realization = 0x7ea1_1247,
    Collision = 0xc011_1510,
    Oracle = 0x0ac1_e000,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent substream for `(seed, purpose, index)`.
pub fn substream(seed: u64, purpose: Stream, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ purpose as u64));
    rng.set_stream(index);
    rng
}

/// Fresh master stream for a seed.
pub fn master(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
