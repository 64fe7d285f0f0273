//! Seeded, named random streams.
//!
//! Every stochastic component of a run (environment seeds, exploration,
//! quantile draws, bootstrap masks, weight init) pulls from its own ChaCha
//! stream derived from one master seed, so components can be reordered or
//! parallelized without perturbing each other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream ids. Per-member streams add the member index to the base.
pub const STREAM_ENV: u64 = 1;
pub const STREAM_EXPLORE: u64 = 2;
pub const STREAM_BOOTSTRAP: u64 = 3;
pub const STREAM_INIT_BASE: u64 = 1_000;
pub const STREAM_TAU_BASE: u64 = 2_000;
pub const STREAM_SAMPLE_BASE: u64 = 3_000;

/// A deterministic rng for stream `stream` of run `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
