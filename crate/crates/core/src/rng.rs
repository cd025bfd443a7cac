//! Seeded, reproducible random streams.
//!
//! Every replica of an experiment draws from its own ChaCha stream keyed by
//! `(seed, replica_index)`. Streams never overlap, so results do not depend
//! on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub type Stream = ChaCha8Rng;

pub fn derive_stream(seed: u64, replica: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Runs `job` for every replica index on the rayon pool and returns results
/// in replica order.
pub fn run_replicas<T, F>(seed: u64, replicas: usize, job: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut Stream) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = derive_stream(seed, r as u64);
            job(r, &mut rng)
        })
        .collect()
}
