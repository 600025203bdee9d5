//! Seeded random streams.
//!
//! Every random draw in the pipeline comes from a ChaCha8 stream
//! (`rand_chacha::ChaCha8Rng`, a published and platform-independent
//! generator). Per-item streams are keyed by hashing the parent seed together
//! with the item's identity through SplitMix64, so items can be processed in
//! any order or in parallel and still draw the same numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::features::fnv1a64;

pub type PipelineRng = ChaCha8Rng;

/// One step of SplitMix64 (Steele, Lea and Flood), returning the new state and output.
pub fn splitmix64(state: u64) -> (u64, u64) {
    let state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (state, z ^ (z >> 31))
}

/// 256-bit ChaCha seed expanded from `key` with SplitMix64.
pub fn expand_seed(key: u64) -> [u8; 32] {
    let mut seed = [0u8; 32];
    let mut state = key;
    for chunk in seed.chunks_exact_mut(8) {
        let (next, out) = splitmix64(state);
        state = next;
        chunk.copy_from_slice(&out.to_le_bytes());
    }
    seed
}

pub fn rng_from_seed(seed: u64) -> PipelineRng {
    ChaCha8Rng::from_seed(expand_seed(seed))
}

/// Stream for copy `copy` of the record identified by `record_id`.
pub fn record_rng(seed: u64, record_id: &str, copy: u64) -> PipelineRng {
    let (_, a) = splitmix64(seed);
    let (_, b) = splitmix64(a ^ fnv1a64(record_id.as_bytes()));
    let (_, key) = splitmix64(b ^ copy);
    rng_from_seed(key)
}
