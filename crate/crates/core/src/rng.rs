//! Replica random streams and the two variate transforms used everywhere.
//!
//! Replica `k` of an ensemble with master seed `s` draws from a ChaCha8
//! generator seeded with [`mix64`]`(s, k)`. Uniforms are taken on the open
//! interval (0, 1) so that `ln(U)` is always finite.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random stream handed to one replica.
pub type ReplicaRng = ChaCha8Rng;

/// SplitMix64 output finalizer.
#[inline]
pub const fn splitmix64_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replica `index` under `master_seed`: the SplitMix64 finalizer
/// applied to `master_seed ^ index`.
#[inline]
pub const fn mix64(master_seed: u64, index: u64) -> u64 {
    splitmix64_finalize(master_seed ^ index)
}

/// Generator for replica `index`.
pub fn replica_rng(master_seed: u64, index: u64) -> ReplicaRng {
    ChaCha8Rng::seed_from_u64(mix64(master_seed, index))
}

/// Uniform variate on the open interval (0, 1), with 52 bits of resolution.
#[inline]
pub fn uniform_open01<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    // Midpoints of the 2^52 dyadic cells, all exactly representable.
    ((rng.next_u64() >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Exponential variate with the given rate by inversion, `-ln(U) / rate`.
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -uniform_open01(rng).ln() / rate
}

/// Two independent standard normals by the Box–Muller transform.
#[inline]
pub fn normal_pair<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = uniform_open01(rng);
    let u2 = uniform_open01(rng);
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Fills `out` with standard normals, consuming exactly
/// `2 * ceil(out.len() / 2)` uniforms. The spare variate of an odd-length
/// fill is discarded.
pub fn fill_standard_normal<R: RngCore + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut chunks = out.chunks_exact_mut(2);
    for pair in &mut chunks {
        let (a, b) = normal_pair(rng);
        pair[0] = a;
        pair[1] = b;
    }
    if let [last] = chunks.into_remainder() {
        *last = normal_pair(rng).0;
    }
}
