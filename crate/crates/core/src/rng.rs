//! Seeding conventions shared by every stochastic routine.
//!
//! All randomness flows from a `u64` seed through ChaCha8, so outputs are
//! reproducible across platforms. Replicate `i` of a study or bootstrap run
//! uses `seed + i` (wrapping); independent streams inside one replicate are
//! separated with [`stream_seed`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for replicate `index` of a run started from `seed`.
#[inline]
pub fn replicate_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_add(index as u64)
}

/// Derives a decorrelated seed for a named sub-stream (splitmix64 finalizer).
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
