//! Seeded generators and derived seeds.
//!
//! Every stochastic step takes an explicit `u64` seed. Sub-seeds are derived
//! with SplitMix64 so a single master seed fixes a whole experiment:
//! `derive_seed(master, &[a, b, ...])` folds each tag into the state and
//! returns the mixed value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| {
        splitmix64(acc ^ splitmix64(t))
    })
}

/// Stable 64-bit tag for a string (FNV-1a).
pub fn tag(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
