//! Seeded random streams.
//!
//! Every stream is a ChaCha8 generator keyed by `(master seed, node, round,
//! purpose)` through SplitMix64, so a node's draws never depend on how
//! many other nodes ran before it or on which worker ran it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math;

pub type StreamRng = ChaCha8Rng;

/// What a stream is used for; part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Data = 1,
    Init = 2,
    Train = 3,
    Attack = 4,
    Fuzz = 5,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream for `(seed, node, round, purpose)`.
pub fn stream(seed: u64, node: u64, round: u64, purpose: Purpose) -> StreamRng {
    let mut key = splitmix64(seed);
    key = splitmix64(key ^ node);
    key = splitmix64(key ^ round);
    key = splitmix64(key ^ purpose as u64);
    ChaCha8Rng::seed_from_u64(key)
}

/// Standard normal sample by the Box-Muller transform (cosine branch).
///
/// Consumes exactly two uniforms per call; the sine branch is discarded so
/// the draw count per sample is fixed.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // u1 in (0, 1] keeps ln finite
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    math::sqrt(-2.0 * math::ln(u1)) * math::cos(core::f64::consts::TAU * u2)
}

/// Gaussian sample with the given mean and standard deviation.
pub fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, std: f64) -> f64 {
    mean + std * standard_normal(rng)
}
