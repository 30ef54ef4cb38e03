//! Deterministic RNG streams.
//!
//! Every random decision in the crate draws from a stream keyed by a base seed
//! plus a short path of integers, so that independent consumers (task batches,
//! language batches, dropout masks of a given example) never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `path` into `seed`.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(seed), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}

/// Stream identifiers used as the first path element.
pub(crate) mod streams {
    pub const CORPUS: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const INIT: u64 = 3;
    pub const TASK_ORDER: u64 = 4;
    pub const LID_ORDER: u64 = 5;
    pub const TASK_DROPOUT: u64 = 6;
    pub const LID_DROPOUT: u64 = 7;
    pub const MLM: u64 = 8;
    pub const SEARCH: u64 = 9;
    pub const KMEANS: u64 = 10;
    pub const TSNE: u64 = 11;
    pub const SAMPLE: u64 = 12;
    pub const LEXICON: u64 = 13;
    pub const PROBE: u64 = 14;
}
