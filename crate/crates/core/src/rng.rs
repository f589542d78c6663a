//! Seed derivation. Every stochastic step draws from its own ChaCha stream
//! keyed by the master seed plus a purpose tag, so results never depend on
//! thread scheduling or call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with an ordered list of stream tags.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |acc, &t| splitmix64(acc ^ splitmix64(t)))
}

pub fn stream(seed: u64, tags: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tags))
}

// Stream tags.
pub const TAG_INIT: u64 = 1;
pub const TAG_SYNTH: u64 = 2;
pub const TAG_PARTITION: u64 = 3;
pub const TAG_AUX: u64 = 4;
pub const TAG_SELECT: u64 = 5;
pub const TAG_LOCAL: u64 = 6;
pub const TAG_TEST: u64 = 7;
