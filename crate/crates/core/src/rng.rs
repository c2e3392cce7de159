//! Deterministic random streams.
//!
//! Every random draw in the crate comes from ChaCha8 keyed by a user seed,
//! with an independent stream per sample index so that parallel workers
//! reproduce the same values regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// The stream for sample `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
