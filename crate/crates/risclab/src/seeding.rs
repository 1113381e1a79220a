//! Deterministic RNG streams derived from a single root seed.
//!
//! Each concern (action exploration, switch draws, replay sampling, the
//! environment) gets its own stream so that a change in one consumer —
//! say, a controller that draws more or fewer switch decisions — cannot
//! perturb any other stream. Stream seeds are derived with a fixed
//! splitmix64/FNV-1a scheme so they are stable across platforms and
//! releases, unlike `std`'s hashers.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; a well-mixed 64-bit permutation.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A deterministic child seed for `tag` under `root`.
pub fn derive_seed(root: u64, tag: &str) -> u64 {
    splitmix64(root ^ fnv1a(tag))
}

/// A seeded RNG for the stream named `tag`.
pub fn stream(root: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tag))
}

/// An indexed substream, e.g. one per bootstrap replication.
pub fn substream(root: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(derive_seed(root, tag) ^ splitmix64(index)))
}

/// The per-concern RNG streams used by one training run.
pub struct RngStreams {
    /// ε-greedy exploration draws.
    pub actions: ChaCha8Rng,
    /// Trajectory gating and early-switch draws.
    pub switching: ChaCha8Rng,
    /// Replay batch sampling.
    pub replay: ChaCha8Rng,
    /// Reserved for stochastic environments (initial-state sampling).
    pub env: ChaCha8Rng,
}

impl RngStreams {
    pub fn from_root(root: u64) -> Self {
        Self {
            actions: stream(root, "actions"),
            switching: stream(root, "switching"),
            replay: stream(root, "replay"),
            env: stream(root, "env"),
        }
    }
}
