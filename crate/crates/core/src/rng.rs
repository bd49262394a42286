//! Counter-based seed splitting.
//!
//! Every random quantity is drawn from its own ChaCha stream addressed by
//! `(master seed, domain, index)`, so agent `i`'s draw does not depend on how
//! many agents are sampled or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains.
pub mod domain {
    pub const TRUE_STATE: u64 = 1;
    pub const SIGNAL: u64 = 2;
    pub const MISSPEC: u64 = 3;
    pub const TRIAL: u64 = 4;
}

/// SplitMix64 finaliser.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed; used for per-trial master seeds.
pub fn derive_seed(seed: u64, domain: u64, index: u64) -> u64 {
    mix(mix(seed ^ mix(domain)) ^ index)
}

pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed ^ mix(domain)));
    rng.set_stream(index);
    rng
}
