//! Seeded, splittable random streams.
//!
//! Every stochastic step draws from a ChaCha8 generator keyed by the run
//! seed and separated by a stream id, so independent work units (sweep
//! cells, folds, fold-in passes) stay reproducible in any execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream ids reserved for pipeline steps; sweep cells use `CELL_BASE + n`.
pub mod streams {
    pub const FIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const FOLD_IN: u64 = 3;
    pub const VALIDATION: u64 = 4;
    pub const CELL_BASE: u64 = 1 << 32;
}

pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
