//! Deterministic seed derivation.
//!
//! Every trial gets a seed mixed from `(master, index)`, and each trial splits
//! that seed into independent ChaCha streams so that, for example, holding
//! times can be switched on without perturbing the jump sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

/// Stream ids used inside a single trial.
pub const JUMPS: u64 = 0;
pub const DETAIL: u64 = 1;
pub const CLOCK: u64 = 2;
pub const DEGREES: u64 = 3;
pub const GRAPH: u64 = 4;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` under `master`.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(GOLDEN))
}

/// Independent stream `id` of a trial seed.
pub fn stream(seed: u64, id: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
