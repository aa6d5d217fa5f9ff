//! Shared input generators for the benchmark suites.

use rand::Rng;

use drm_rl::seeding::{substream, TAG_ESTIMATE};

/// Deterministic pseudo-return batch on the layered-chain scale.
pub fn synthetic_returns(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, TAG_ESTIMATE, m as u64, 0);
    (0..m).map(|_| rng.gen_range(-3.0..3.0)).collect()
}

/// Nonnegative importance weights with occasional zeros and values past 1.
pub fn synthetic_weights(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = substream(seed, TAG_ESTIMATE, m as u64, 1);
    (0..m)
        .map(|_| {
            if rng.gen_bool(0.1) {
                0.0
            } else {
                rng.gen_range(0.05..2.5)
            }
        })
        .collect()
}
