//! Seed derivation for reproducible, order-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and an ordered list of keys.
pub fn derive_seed(parent: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(mix64(parent), |acc, &k| mix64(acc ^ mix64(k.wrapping_add(0x632b_e59b_d9b4_e019))))
}

/// Seed of replica `index` in an ensemble rooted at `base`.
pub fn replica_seed(base: u64, index: usize) -> u64 {
    derive_seed(base, &[0x5245_504c, index as u64])
}

/// An independent generator keyed on `(seed, keys)`.
pub fn keyed_rng(seed: u64, keys: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, keys))
}
