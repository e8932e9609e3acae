#![allow(dead_code)]

pub mod chacha;
pub mod oracle;

use depthkit::DepthMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn test_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random map with entries in `[lo, hi)` and roughly `zero_frac` zeros.
pub fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64, zero_frac: f64) -> DepthMap {
    let data = (0..w * h)
        .map(|_| {
            if rng.random::<f64>() < zero_frac {
                0.0
            } else {
                rng.random_range(lo..hi)
            }
        })
        .collect();
    DepthMap::new(w, h, data).unwrap()
}

/// Random labels in `0..=k`, roughly `gap_frac` zeros, every label in
/// `1..=k` present at least once.
pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, k: u32, gap_frac: f64) -> Vec<u32> {
    let mut labels: Vec<u32> = (0..n)
        .map(|_| {
            if rng.random::<f64>() < gap_frac {
                0
            } else {
                rng.random_range(1..=k)
            }
        })
        .collect();
    for l in 1..=k.min(n as u32) {
        labels[(l - 1) as usize] = l;
    }
    labels
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
