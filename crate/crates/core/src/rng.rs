//! Deterministic random streams. Every draw in the crate comes from a
//! ChaCha8 generator keyed by an explicit 64-bit seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = seeded(seed);
    rng.set_stream(stream);
    rng
}

/// Stream addressed by a pair of indices, e.g. (cell, sample).
pub fn stream2(seed: u64, major: u32, minor: u32) -> SimRng {
    stream(seed, (u64::from(major) << 32) | u64::from(minor))
}
