use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{Tree, TreeBuilder, TreeEnsemble};

/// Shape of a random ensemble. Inputs are expected in `[0, 1)`; thresholds
/// are drawn from the same range.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomEnsembleSpec {
    pub trees: usize,
    pub features: usize,
    pub max_depth: usize,
    pub seed: u64,
}

/// Probability that a non-root node above `max_depth` is split further.
const SPLIT_PROBABILITY: f64 = 0.85;

/// Generates a valid ensemble with random splits, thresholds, leaf values
/// and cover-consistent node weights. Deterministic in `spec.seed`.
pub fn generate_random_ensemble(spec: RandomEnsembleSpec) -> TreeEnsemble {
    assert!(spec.trees >= 1 && spec.features >= 1 && spec.max_depth >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let trees: Vec<Tree> = (0..spec.trees)
        .map(|_| random_tree(&mut rng, spec.features, spec.max_depth))
        .collect();
    TreeEnsemble::new(trees, spec.features).expect("generated trees are valid")
}

fn random_tree(rng: &mut ChaCha8Rng, features: usize, max_depth: usize) -> Tree {
    let mut b = TreeBuilder::new();
    let root_cover = rng.random_range(50.0..500.0);
    let root = grow(&mut b, rng, features, max_depth, 0, root_cover);
    b.build(root, features).expect("generated tree is valid")
}

fn grow(
    b: &mut TreeBuilder,
    rng: &mut ChaCha8Rng,
    features: usize,
    max_depth: usize,
    depth: usize,
    cover: f64,
) -> usize {
    let split = depth == 0 || (depth < max_depth && rng.random_bool(SPLIT_PROBABILITY));
    if !split {
        let value: f64 = rng.sample(StandardNormal);
        return b.leaf(value, cover);
    }
    let feature = rng.random_range(0..features);
    let threshold = rng.random_range(0.0..1.0);
    let frac = rng.random_range(0.05..0.95);
    let left_cover = cover * frac;
    let right_cover = cover - left_cover;
    let default_left = rng.random_bool(0.5);
    let gain = rng.random_range(0.0..1.0) * cover;
    let left = grow(b, rng, features, max_depth, depth + 1, left_cover);
    let right = grow(b, rng, features, max_depth, depth + 1, right_cover);
    b.split_full(feature, threshold, left, right, default_left, gain)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_spec() {
        let m = generate_random_ensemble(RandomEnsembleSpec {
            trees: 1,
            features: 1,
            max_depth: 1,
            seed: 3,
        });
        let t = &m.trees()[0];
        assert_eq!(t.len(), 3);
        assert!((t.cover(1) + t.cover(2) - t.cover(0)).abs() < 1e-9);
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = RandomEnsembleSpec {
            trees: 7,
            features: 5,
            max_depth: 4,
            seed: 11,
        };
        assert_eq!(generate_random_ensemble(spec), generate_random_ensemble(spec));
        let other = generate_random_ensemble(RandomEnsembleSpec { seed: 12, ..spec });
        assert_ne!(generate_random_ensemble(spec), other);
    }

    #[test]
    fn depth_bounded() {
        let m = generate_random_ensemble(RandomEnsembleSpec {
            trees: 20,
            features: 8,
            max_depth: 5,
            seed: 1,
        });
        assert!(m.max_depth() <= 5);
        assert!(m.trees().iter().all(|t| t.max_depth() >= 1));
    }
}
