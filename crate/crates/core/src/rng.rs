//! Deterministic seeded random streams.
//!
//! Every stochastic operation in this crate takes an explicit `u64` seed and
//! builds its own generator, so results are reproducible and independent of
//! call order. Sub-streams (one per sweep cell, per bootstrap resample, ...)
//! derive their seeds with [`derive_seed`] so that no two streams share state.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// Portable seeded generator used throughout the crate.
pub type SeededRng = ChaCha8Rng;

/// Build a generator from a bare seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    SeededRng::seed_from_u64(seed)
}

/// Mix a base seed with a tag sequence into a new seed (SplitMix64 steps).
///
/// Distinct tag sequences give statistically independent streams for the
/// same base seed.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut state = base.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1);
    for &tag in tags {
        state ^= splitmix64(tag.wrapping_add(0xd1b5_4a32_d192_ed03));
        state = splitmix64(state);
    }
    splitmix64(state)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform draw in the open interval (0, 1).
///
/// Draws are made in `f64` and narrowed, so the underlying stream is the
/// same for every scalar width.
pub fn uniform_open01<T: Scalar>(rng: &mut impl Rng) -> T {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 && u < 1.0 {
            return T::from_f64_lossy(u);
        }
    }
}

/// Standard normal draw via Box-Muller.
pub fn standard_normal<T: Scalar>(rng: &mut impl Rng) -> T {
    let u1: f64 = uniform_open01(rng);
    let u2: f64 = uniform_open01(rng);
    T::from_f64_lossy((-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos())
}
