//! Seeded, order-independent sampling.
//!
//! Every random draw in the pipeline goes through a ChaCha8 stream whose key is
//! derived from `(seed, stream name, community)`, so per-community results do not
//! depend on the order in which communities are processed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Identifier of the sampling algorithm, recorded in run manifests.
pub const PRNG_ID: &str = "chacha8/sha256-keyed/fisher-yates-v1";

pub fn stream_rng(seed: u64, stream: &str, key: &str) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update((stream.len() as u64).to_le_bytes());
    hasher.update(stream.as_bytes());
    hasher.update(key.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Uniform integer in `0..bound` by rejection sampling (`bound > 0`).
pub fn uniform_below(rng: &mut impl RngCore, bound: u64) -> u64 {
    assert!(bound > 0, "bound must be positive");
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

/// Draws `k` distinct indices from `0..n` with a partial Fisher-Yates shuffle.
/// The result is sorted ascending.
pub fn sample_indices(rng: &mut impl RngCore, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n, "cannot sample {k} of {n}");
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = i + uniform_below(rng, (n - i) as u64) as usize;
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    chosen
}
