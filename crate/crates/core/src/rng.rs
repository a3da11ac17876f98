//! Deterministic seed derivation.
//!
//! Every randomized task draws from its own generator, seeded by mixing the
//! master seed with a stream tag and a task index through SplitMix64. Task
//! seeds therefore never depend on the order in which parallel tasks run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TaskRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for task `index` of stream `stream` under `master`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ stream.wrapping_mul(GOLDEN));
    splitmix64(b ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

pub fn task_rng(master: u64, stream: u64, index: u64) -> TaskRng {
    TaskRng::seed_from_u64(derive_seed(master, stream, index))
}
