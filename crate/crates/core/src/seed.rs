//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from one 64-bit master seed. Independent
//! streams (restart k, grid cell, generator stage) are derived by mixing the
//! master seed with a domain tag and counters through a SplitMix64-style
//! finalizer, then feeding the result to a ChaCha stream cipher RNG. Identical
//! `(master, words)` always yields an identical stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags keeping unrelated consumers on disjoint streams.
pub mod domain {
    /// Multi-start initialization (permutation draws).
    pub const INIT: u64 = 0x01;
    /// Per-restart stream (membership fallback and repairs).
    pub const RESTART: u64 = 0x02;
    /// Model-selection grid cell.
    pub const CELL: u64 = 0x03;
    /// Synthetic data generator.
    pub const SYNTH: u64 = 0x04;
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `words` into `master`, producing a derived 64-bit seed.
pub fn derive(master: u64, words: &[u64]) -> u64 {
    let mut state = splitmix(master);
    for &w in words {
        state = splitmix(state ^ splitmix(w));
    }
    state
}

/// A seeded RNG on the stream identified by `words`.
pub fn rng(master: u64, words: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, words))
}
