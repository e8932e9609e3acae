//! Seeded random streams.
//!
//! Every random consumer draws from its own ChaCha8 stream keyed by the
//! user seed, so adding a segment or changing the noise level never shifts
//! another consumer's draws.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids below `1 << 32` belong to segment labels.
pub const NOISE_STREAM: u64 = 1 << 32;
pub const SAMPLING_STREAM: u64 = 2 << 32;
pub const SCENE_STREAM: u64 = 3 << 32;
pub const PERTURB_STREAM: u64 = 4 << 32;

/// ChaCha8 keyed by `seed` (little-endian in the first eight key bytes,
/// the rest zero), positioned at the start of `stream`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

pub fn segment_stream(seed: u64, label: u32) -> ChaCha8Rng {
    stream(seed, u64::from(label))
}

/// Uniform in [0, 1) from the top 53 bits of one `u64` draw.
pub fn unit_f64<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [lo, hi]; collapses to `lo` when the interval is empty.
pub fn uniform<R: RngCore>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u = unit_f64(rng);
    lo + (hi - lo) * u
}
