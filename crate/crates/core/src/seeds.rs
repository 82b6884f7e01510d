//! Deterministic derivation of independent RNG streams.
//!
//! Every stream is keyed by a master seed and a path of indices (trial,
//! client, purpose, ...), so results do not depend on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream purposes, mixed into the derivation path.
pub mod tag {
    pub const DATA: u64 = 0x6461_7461;
    pub const TIES: u64 = 0x7469_6573;
    pub const DEALER: u64 = 0x6465_616c;
    pub const PARTITION: u64 = 0x7061_7274;
    pub const CENTROID: u64 = 0x6365_6e74;
    pub const QUANT: u64 = 0x7175_616e;
    pub const BALLOT: u64 = 0x6261_6c6c;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}
