//! Shared fixtures for the criterion benches.

use arbor_core::model::generate_random_ensemble;
use arbor_core::{RandomEnsembleSpec, TreeEnsemble};

pub fn ensemble(trees: usize, features: usize, depth: usize) -> TreeEnsemble {
    generate_random_ensemble(RandomEnsembleSpec {
        trees,
        features,
        max_depth: depth,
        seed: 7,
    })
}

/// Deterministic rows in `[0, 1)` from a small linear congruential stream.
pub fn rows(n: usize, features: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            (0..features)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    (state >> 11) as f64 / (1u64 << 53) as f64
                })
                .collect()
        })
        .collect()
}
