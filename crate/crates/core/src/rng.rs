//! Counter-based random number generation.
//!
//! Every stochastic figure in the crate is derived from an explicit `(seed,
//! stream)` pair, so reruns are bit-reproducible and parallel batches can be
//! merged in a fixed order without sharing generator state.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A deterministic generator for the given seed and stream index.
///
/// Distinct streams of the same seed are independent; batch `i` of a Monte
/// Carlo run uses stream `i` so the estimate does not depend on scheduling.
pub fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = seeded_rng(7, 0).random_iter().take(4).collect();
        let b: Vec<u64> = seeded_rng(7, 0).random_iter().take(4).collect();
        let c: Vec<u64> = seeded_rng(7, 1).random_iter().take(4).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn seed_changes_output() {
        let a: u64 = seeded_rng(1, 0).random();
        let b: u64 = seeded_rng(2, 0).random();
        assert_ne!(a, b);
    }
}
