//! Seeded inputs shared by the benchmarks.

use gtbench::diversity::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` right-censored survival observations on a 5 s poll grid.
pub fn observations(n: usize, seed: u64) -> Vec<(f64, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (f64::from(rng.random_range(1..=720u32)) * 5.0, rng.random_bool(0.7))).collect()
}

/// Per-trial bug counts, with ties.
pub fn counts(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| f64::from(rng.random_range(0..12u32))).collect()
}

/// Canary log events over `bugs` slots, mostly untriggered.
pub fn canary_events(len: usize, bugs: usize, seed: u64) -> Vec<(usize, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| (rng.random_range(0..bugs), rng.random_bool(0.001))).collect()
}

/// A `categories` x `subjects` matrix of random operation counts.
pub fn feature_matrix(categories: usize, subjects: usize, seed: u64) -> FeatureMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    FeatureMatrix {
        subjects: (0..subjects).map(|j| format!("s{j}")).collect(),
        families: vec![None; subjects],
        categories: (0..categories).map(|i| format!("c{i}")).collect(),
        values: (0..categories).map(|_| (0..subjects).map(|_| rng.random_range(0.0..1e4)).collect()).collect(),
    }
}
