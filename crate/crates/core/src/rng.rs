//! Seed derivation and the random generator used throughout the crate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives an independent child seed from a master seed and a stream tag.
pub fn derive_seed(master: u64, tag: &str) -> u64 {
    // FNV-1a over the tag, then mixed with the master seed.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(master ^ splitmix64(h))
}

/// Child seed indexed by integers, e.g. `(epoch, sample)` for noise streams.
pub fn derive_indexed(master: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(splitmix64(master), |acc, &i| {
        splitmix64(acc ^ splitmix64(i.wrapping_add(1)))
    })
}
