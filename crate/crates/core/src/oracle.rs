//! Reference explanations computed directly from their definitions.
//!
//! Everything here enumerates feature subsets, so cost is exponential in
//! the number of features. These functions are the ground truth the fast
//! algorithms are tested against; they make no attempt at efficiency
//! beyond evaluating each subset once.

use crate::error::{Error, Result};
use crate::explanation::{Explanation, FeatureSubset, InteractionExplanation, Method};
use crate::model::{Model, Tree, TreeEnsemble};

/// Largest feature count the enumerating explainers accept by default.
pub const DEFAULT_FEATURE_CAP: usize = 16;

/// Hard upper bound for an explicitly raised cap.
pub const MAX_FEATURE_CAP: usize = 30;

fn tree_exp_value(tree: &Tree, x: &[f64], node: usize, in_set: &dyn Fn(usize) -> bool) -> f64 {
    if tree.is_leaf(node) {
        return tree.value(node);
    }
    if in_set(tree.feature(node)) {
        tree_exp_value(tree, x, tree.next(node, x), in_set)
    } else {
        let (l, r) = (tree.left(node), tree.right(node));
        (tree_exp_value(tree, x, l, in_set) * tree.cover(l)
            + tree_exp_value(tree, x, r, in_set) * tree.cover(r))
            / tree.cover(node)
    }
}

fn ensemble_exp_value(ensemble: &TreeEnsemble, x: &[f64], in_set: &dyn Fn(usize) -> bool) -> f64 {
    ensemble.base_offset()
        + ensemble
            .trees()
            .iter()
            .map(|t| tree_exp_value(t, x, 0, in_set))
            .sum::<f64>()
}

/// `E[f(x) | x_S]` estimated by tree traversal: splits on features in `S`
/// follow `x`, all other splits average both children by cover.
pub fn exp_value(ensemble: &TreeEnsemble, x: &[f64], subset: &FeatureSubset) -> Result<f64> {
    ensemble.check_row(x)?;
    if subset.num_features() != ensemble.num_features() {
        return Err(Error::Dimension {
            expected: ensemble.num_features(),
            got: subset.num_features(),
        });
    }
    Ok(ensemble_exp_value(ensemble, x, &|f| subset.contains(f)))
}

fn check_cap(features: usize, cap: usize) -> Result<()> {
    let cap = cap.min(MAX_FEATURE_CAP);
    if features > cap {
        return Err(Error::OracleCap { features, cap });
    }
    Ok(())
}

/// `s! (m - s - 1)! / m!` for every coalition size `s` in `0..m`.
pub(crate) fn shapley_weights(m: usize) -> Vec<f64> {
    // 1 / (m * C(m-1, s))
    let mut weights = Vec::with_capacity(m);
    let mut binom = 1.0;
    for s in 0..m {
        if s > 0 {
            binom *= (m - s) as f64 / s as f64;
        }
        weights.push(1.0 / (m as f64 * binom));
    }
    weights
}

/// Shapley values of the game with coalition values `v[mask]` over `m`
/// players.
pub fn shapley_from_game(m: usize, v: &[f64]) -> Vec<f64> {
    assert_eq!(v.len(), 1usize << m);
    if m == 0 {
        return Vec::new();
    }
    let w = shapley_weights(m);
    let mut phi = vec![0.0; m];
    for mask in 0..v.len() {
        let size = (mask as u64).count_ones() as usize;
        for (i, p) in phi.iter_mut().enumerate() {
            if mask >> i & 1 == 0 {
                *p += w[size] * (v[mask | 1 << i] - v[mask]);
            }
        }
    }
    phi
}

/// Pairwise Shapley interaction indices `Φ_ij` (i ≠ j) of the game `v`.
pub(crate) fn interaction_from_game(m: usize, v: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; m]; m];
    if m < 2 {
        return out;
    }
    // s! (m - s - 2)! / (2 (m - 1)!) = 1 / (2 (m - 1) C(m-2, s))
    let mut w = Vec::with_capacity(m - 1);
    let mut binom = 1.0;
    for s in 0..m - 1 {
        if s > 0 {
            binom *= (m - 1 - s) as f64 / s as f64;
        }
        w.push(1.0 / (2.0 * (m - 1) as f64 * binom));
    }
    for i in 0..m {
        for j in i + 1..m {
            let (bi, bj) = (1usize << i, 1usize << j);
            let mut total = 0.0;
            for mask in 0..v.len() {
                if mask & (bi | bj) != 0 {
                    continue;
                }
                let size = (mask as u64).count_ones() as usize;
                let grad = v[mask | bi | bj] - v[mask | bi] - v[mask | bj] + v[mask];
                total += w[size] * grad;
            }
            out[i][j] = total;
            out[j][i] = total;
        }
    }
    out
}

fn subset_values(ensemble: &TreeEnsemble, x: &[f64]) -> Vec<f64> {
    let m = ensemble.num_features();
    (0..1u64 << m)
        .map(|mask| ensemble_exp_value(ensemble, x, &|f| mask >> f & 1 == 1))
        .collect()
}

/// Exact SHAP values by enumerating all `2^M` feature subsets with the
/// default feature cap.
pub fn shapley_exact(ensemble: &TreeEnsemble, x: &[f64]) -> Result<Explanation> {
    shapley_exact_with_cap(ensemble, x, DEFAULT_FEATURE_CAP)
}

pub fn shapley_exact_with_cap(ensemble: &TreeEnsemble, x: &[f64], cap: usize) -> Result<Explanation> {
    ensemble.check_row(x)?;
    let m = ensemble.num_features();
    check_cap(m, cap)?;
    let v = subset_values(ensemble, x);
    Ok(Explanation::new(v[0], shapley_from_game(m, &v), Method::Brute))
}

/// Exact SHAP interaction values from their subset definition.
pub fn interaction_exact(ensemble: &TreeEnsemble, x: &[f64]) -> Result<InteractionExplanation> {
    interaction_exact_with_cap(ensemble, x, DEFAULT_FEATURE_CAP)
}

pub fn interaction_exact_with_cap(
    ensemble: &TreeEnsemble,
    x: &[f64],
    cap: usize,
) -> Result<InteractionExplanation> {
    ensemble.check_row(x)?;
    let m = ensemble.num_features();
    check_cap(m, cap)?;
    let v = subset_values(ensemble, x);
    let phi = shapley_from_game(m, &v);
    let pairs = interaction_from_game(m, &v);
    let mut out = InteractionExplanation::zeros(m, v[0]);
    for i in 0..m {
        let mut main = phi[i];
        for j in 0..m {
            if i != j {
                out.set(i, j, pairs[i][j]);
                main -= pairs[i][j];
            }
        }
        out.set(i, i, main);
    }
    Ok(out)
}

/// Path attributions: each split on the decision path credits its feature
/// with the change in cover-weighted node mean from parent to child.
pub fn saabas(ensemble: &TreeEnsemble, x: &[f64]) -> Result<Explanation> {
    ensemble.check_row(x)?;
    let mut phi = vec![0.0; ensemble.num_features()];
    for tree in ensemble.trees() {
        let mut node = 0;
        while !tree.is_leaf(node) {
            let next = tree.next(node, x);
            phi[tree.feature(node)] += tree.node_mean(next) - tree.node_mean(node);
            node = next;
        }
    }
    Ok(Explanation::new(ensemble.expected_value(), phi, Method::Saabas))
}

/// `x` on the features in `mask`, `reference` elsewhere.
pub(crate) fn composite(x: &[f64], reference: &[f64], mask: u64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = if mask >> i & 1 == 1 { x[i] } else { reference[i] };
    }
}

/// Exact Shapley values of the single-reference game
/// `v(S) = f(x on S, reference off S)` by subset enumeration.
pub fn interventional_exact(model: &dyn Model, x: &[f64], reference: &[f64]) -> Result<Explanation> {
    interventional_exact_with_cap(model, x, reference, DEFAULT_FEATURE_CAP)
}

pub fn interventional_exact_with_cap(
    model: &dyn Model,
    x: &[f64],
    reference: &[f64],
    cap: usize,
) -> Result<Explanation> {
    let m = model.num_features();
    for row in [x, reference] {
        if row.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: row.len(),
            });
        }
    }
    check_cap(m, cap)?;
    let mut buf = vec![0.0; m];
    let v: Vec<f64> = (0..1u64 << m)
        .map(|mask| {
            composite(x, reference, mask, &mut buf);
            model.evaluate(&buf)
        })
        .collect();
    Ok(Explanation::new(v[0], shapley_from_game(m, &v), Method::Brute))
}

/// Average of [`interventional_exact`] over a background set.
pub fn interventional_exact_background(
    model: &dyn Model,
    x: &[f64],
    background: &[Vec<f64>],
) -> Result<Explanation> {
    if background.is_empty() {
        return Err(Error::EmptyBackground);
    }
    let m = model.num_features();
    let mut base = 0.0;
    let mut values = vec![0.0; m];
    for r in background {
        let e = interventional_exact(model, x, r)?;
        base += e.base;
        for (a, b) in values.iter_mut().zip(&e.values) {
            *a += b;
        }
    }
    let n = background.len() as f64;
    values.iter_mut().for_each(|v| *v /= n);
    Ok(Explanation::new(base / n, values, Method::Brute))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{and_model, k_way_and};
    use crate::model::{FnModel, TreeBuilder};

    #[test]
    fn weights_match_factorial_form() {
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        for m in 1..8 {
            let w = shapley_weights(m);
            for s in 0..m {
                let expected = fact(s) * fact(m - s - 1) / fact(m);
                assert!((w[s] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn exp_value_anchors() {
        let m = and_model();
        let x = [1.0, 1.0];
        let all = FeatureSubset::full(2);
        let none = FeatureSubset::empty(2);
        let fever = FeatureSubset::from_indices(2, &[0]).unwrap();
        assert_eq!(exp_value(&m, &x, &all).unwrap(), 80.0);
        assert_eq!(exp_value(&m, &x, &none).unwrap(), 20.0);
        assert_eq!(exp_value(&m, &x, &fever).unwrap(), 40.0);
    }

    #[test]
    fn and_fixture_shapley() {
        let e = shapley_exact(&and_model(), &[1.0, 1.0]).unwrap();
        assert_eq!(e.base, 20.0);
        assert_eq!(e.values, [30.0, 30.0]);
    }

    #[test]
    fn and_fixture_interactions() {
        let e = interaction_exact(&and_model(), &[1.0, 1.0]).unwrap();
        assert_eq!(e.get(0, 1), 10.0);
        assert_eq!(e.get(1, 0), 10.0);
        assert_eq!(e.get(0, 0), 20.0);
        assert_eq!(e.get(1, 1), 20.0);
        assert_eq!(e.bias(), 20.0);
        assert_eq!(e.total(), 80.0);
    }

    #[test]
    fn and_fixture_saabas() {
        let e = saabas(&and_model(), &[1.0, 1.0]).unwrap();
        assert_eq!(e.values, [20.0, 40.0]);
        assert_eq!(e.total(), 80.0);
    }

    fn stump(feature: usize, m: usize, lo: f64, hi: f64, lc: f64, hc: f64) -> Tree {
        let mut b = TreeBuilder::new();
        let l = b.leaf(lo, lc);
        let r = b.leaf(hi, hc);
        let root = b.split(feature, 0.5, l, r);
        b.build(root, m).unwrap()
    }

    #[test]
    fn additive_stumps() {
        let trees = vec![
            stump(0, 3, 1.0, 4.0, 3.0, 1.0),
            stump(1, 3, -2.0, 2.0, 1.0, 1.0),
        ];
        let m = TreeEnsemble::new(trees, 3).unwrap();
        let x = [0.9, 0.1, 0.7];
        let e = shapley_exact(&m, &x).unwrap();
        // stump_i(x_i) - E[stump_i]
        assert!((e.values[0] - (4.0 - 1.75)).abs() < 1e-12);
        assert!((e.values[1] - (-2.0 - 0.0)).abs() < 1e-12);
        assert_eq!(e.values[2], 0.0);
        let inter = interaction_exact(&m, &x).unwrap();
        assert!(inter.get(0, 1).abs() < 1e-12 && inter.get(0, 2).abs() < 1e-12);
    }

    #[test]
    fn single_stump_saabas_equals_shapley() {
        let m = TreeEnsemble::new(vec![stump(0, 1, 1.0, 5.0, 2.0, 6.0)], 1).unwrap();
        for x in [0.2, 0.8] {
            let a = saabas(&m, &[x]).unwrap();
            let b = shapley_exact(&m, &[x]).unwrap();
            assert!((a.values[0] - b.values[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn saabas_gives_root_least_credit_on_deep_and() {
        let m = k_way_and(4, 16.0);
        let e = saabas(&m, &[1.0; 4]).unwrap();
        let root = e.values[0];
        assert!(e.values[1..].iter().all(|&v| v > root), "{:?}", e.values);
    }

    #[test]
    fn cap_is_enforced() {
        let m = crate::model::generate_random_ensemble(crate::model::RandomEnsembleSpec {
            trees: 1,
            features: 20,
            max_depth: 2,
            seed: 0,
        });
        let err = shapley_exact(&m, &[0.5; 20]).unwrap_err();
        assert!(matches!(err, Error::OracleCap { features: 20, cap: 16 }));
    }

    #[test]
    fn interventional_single_player() {
        let model = FnModel::new(3, |x: &[f64]| x[0] * x[1] + x[2]);
        let e = interventional_exact(&model, &[2.0, 3.0, 1.0], &[2.0, 3.0, 0.0]).unwrap();
        assert_eq!(e.values, [0.0, 0.0, 1.0]);
        assert_eq!(e.base, 6.0);
    }
}
