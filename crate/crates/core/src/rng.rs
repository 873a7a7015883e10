//! Portable, splittable random number generation.
//!
//! All stochastic code in this crate draws from ChaCha8, which produces the
//! same stream on every platform and supports 2^64 independent streams per
//! seed. Reproducibility therefore never depends on scheduling: each unit of
//! work (a simulation replica, a Monte Carlo batch) owns a stream derived
//! from the master seed and its own index.
//!
//! Stream layout used by the simulation engine, for a replica index `r`:
//! - stream `2*r` seeds the replica's graph construction,
//! - stream `2*r + 1` drives everything else in the replica (package
//!   drawings, exposure splits, click and share draws, mutation).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The crate's RNG. Identical output across platforms for a given
/// (seed, stream) pair.
pub type PortableRng = ChaCha8Rng;

/// RNG seeded by `seed` on stream 0.
pub fn seeded(seed: u64) -> PortableRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// RNG on an independent stream of the same master seed.
pub fn stream(seed: u64, stream: u64) -> PortableRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Graph-construction stream for a replica.
pub fn replica_graph_stream(replica_index: u32) -> u64 {
    2 * replica_index as u64
}

/// Simulation-dynamics stream for a replica.
pub fn replica_sim_stream(replica_index: u32) -> u64 {
    2 * replica_index as u64 + 1
}
