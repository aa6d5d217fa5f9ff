//! Deterministic RNG substream derivation.
//!
//! Every random decision in a run draws from its own ChaCha8 stream keyed
//! by (master seed, purpose tag, two index words). Streams for different
//! keys never overlap because the key tuple is written verbatim into the
//! 32-byte ChaCha seed, so serial and parallel execution of the same run
//! consume identical randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sphere-direction draw for (iteration, direction index).
pub const TAG_DIRECTION: u64 = 1;
/// On-policy episode under theta + mu v, keyed ((iteration, direction), episode).
pub const TAG_EPISODE_PLUS: u64 = 2;
/// On-policy episode under theta - mu v, keyed ((iteration, direction), episode).
pub const TAG_EPISODE_MINUS: u64 = 3;
/// Behavior-policy episode, keyed (iteration, episode).
pub const TAG_BEHAVIOR_EPISODE: u64 = 4;
/// Selection of the returned iterate theta_R.
pub const TAG_SELECT: u64 = 5;
/// Estimation sweep batches, keyed (batch size, batch index).
pub const TAG_ESTIMATE: u64 = 6;

/// Independent stream for the exact key (master_seed, tag, a, b).
pub fn substream(master_seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut seed = [0u8; 32];
    seed[0..8].copy_from_slice(&master_seed.to_le_bytes());
    seed[8..16].copy_from_slice(&tag.to_le_bytes());
    seed[16..24].copy_from_slice(&a.to_le_bytes());
    seed[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(seed)
}

/// Packs (iteration, direction) into one key word. Both must fit in 32
/// bits, which any feasible run satisfies.
pub fn pack_iter_direction(iteration: usize, direction: usize) -> u64 {
    debug_assert!(iteration < (1 << 32) && direction < (1 << 32));
    ((iteration as u64) << 32) | direction as u64
}
