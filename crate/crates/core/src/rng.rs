//! Counter-based random substreams.
//!
//! Every Monte Carlo unit of work (a scenario, a price path, a restart) gets
//! its own ChaCha stream addressed by `(seed, stream id)`. Draws therefore do
//! not depend on how the work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Distinct stream-id namespaces so unrelated consumers sharing a seed never
/// alias each other.
#[derive(Clone, Copy, Debug)]
#[repr(u64)]
pub enum Domain {
    NigSamples = 1,
    Scenarios = 2,
    PricePaths = 3,
    FactorRestarts = 4,
    OptimizerRestarts = 5,
    Simulation = 6,
}

/// Rng for unit `index` of `domain` under `seed`.
pub fn substream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 48) ^ index);
    rng
}

/// Block size used when a long stream of i.i.d. draws is split across threads.
pub const BLOCK: usize = 4096;
