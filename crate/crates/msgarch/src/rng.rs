//! Deterministic RNG streams: one master seed, one sub-stream per unit, so
//! per-unit updates can run in parallel (or be permuted) without changing the
//! draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream 0 is reserved for global (cross-unit) updates.
pub const GLOBAL_STREAM: u64 = 0;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Per-unit streams 1..=n derived from the master seed.
pub fn unit_rngs(seed: u64, n_units: usize) -> Vec<ChaCha8Rng> {
    (0..n_units)
        .map(|i| stream_rng(seed, 1 + i as u64))
        .collect()
}
