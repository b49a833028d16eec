//! Seeded randomness with derived sub-streams.
//!
//! Every stochastic operation in this crate draws from a ChaCha8 stream keyed
//! by a SplitMix64 hash of `(seed, purpose tag, index)`. Equal inputs give
//! bit-identical streams on every platform; distinct purpose tags or indices
//! give statistically independent streams, so parallel trials never share
//! state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; the standard 64-bit avalanche mix.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes, so purpose strings land in distinct streams.
fn hash_tag(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive the sub-stream seed for `(seed, tag, index)`.
pub fn derive_seed(seed: u64, tag: &str, index: u64) -> u64 {
    splitmix64(seed ^ splitmix64(hash_tag(tag)) ^ splitmix64(index.wrapping_mul(0xa076_1d64_78bd_642f)))
}

/// A deterministic generator for the given `(seed, tag, index)` sub-stream.
pub fn stream(seed: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, tag, index))
}
