//! Polynomial-time exact SHAP values for tree ensembles.
//!
//! A single traversal per tree tracks, for every coalition size, the
//! Shapley-weighted proportion of feature subsets that reach each node (the
//! "subset path"). Leaves then unwind each feature on the path to read off
//! its weight. Cost is `O(T L D^2)` time and `O(D^2 + M)` memory.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::model::{Tree, TreeEnsemble};

const SENTINEL: usize = usize::MAX;

/// One unique feature on the current root-to-node path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathEntry {
    feature: usize,
    /// Fraction of "zero" paths (feature not in S) flowing through here.
    zero: f64,
    /// Fraction of "one" paths (feature in S) flowing through here.
    one: f64,
    /// Shapley-weighted proportion of subsets of size equal to this slot.
    weight: f64,
}

impl PathEntry {
    const EMPTY: PathEntry = PathEntry {
        feature: SENTINEL,
        zero: 0.0,
        one: 0.0,
        weight: 0.0,
    };

    /// `None` for the root sentinel.
    pub fn feature(&self) -> Option<usize> {
        (self.feature != SENTINEL).then_some(self.feature)
    }

    pub fn zero_fraction(&self) -> f64 {
        self.zero
    }

    pub fn one_fraction(&self) -> f64 {
        self.one
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }
}

/// Appends an entry at index `depth` (the current path length) and grows
/// every subset size by the given zero and one fractions.
#[inline]
fn extend_path(path: &mut [PathEntry], depth: usize, zero: f64, one: f64, feature: usize) {
    path[depth] = PathEntry {
        feature,
        zero,
        one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let denom = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / denom;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / denom;
    }
}

/// Undoes the extension of entry `index` on a path whose last entry is at
/// `depth`; entries after `index` shift down by one.
#[inline]
fn unwind_path(path: &mut [PathEntry], depth: usize, index: usize) {
    let one = path[index].one;
    let zero = path[index].zero;
    let mut next_one_portion = path[depth].weight;
    let scale = (depth + 1) as f64;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next_one_portion * scale / ((i + 1) as f64 * one);
            next_one_portion = tmp - path[i].weight * zero * (depth - i) as f64 / scale;
        } else {
            path[i].weight = path[i].weight * scale / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero = path[i + 1].zero;
        path[i].one = path[i + 1].one;
    }
}

/// Total weight the path would have after unwinding entry `index`, without
/// modifying it.
#[inline]
fn unwound_path_sum(path: &[PathEntry], depth: usize, index: usize) -> f64 {
    let one = path[index].one;
    let zero = path[index].zero;
    let mut next_one_portion = path[depth].weight;
    let mut total = 0.0;
    if one != 0.0 {
        for i in (0..depth).rev() {
            let tmp = next_one_portion / ((i + 1) as f64 * one);
            total += tmp;
            next_one_portion = path[i].weight - tmp * zero * (depth - i) as f64;
        }
    } else if zero != 0.0 {
        for i in (0..depth).rev() {
            total += path[i].weight / (zero * (depth - i) as f64);
        }
    }
    total * (depth + 1) as f64
}

/// Owned subset path, for inspecting and testing the path algebra.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SubsetPath {
    entries: Vec<PathEntry>,
}

impl SubsetPath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[PathEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    /// Returns the path extended by a feature (`None` for the root
    /// sentinel) carrying zero fraction `zero` and one fraction `one`.
    pub fn extend(&self, zero: f64, one: f64, feature: Option<usize>) -> SubsetPath {
        let mut entries = self.entries.clone();
        entries.push(PathEntry::EMPTY);
        let depth = self.entries.len();
        extend_path(&mut entries, depth, zero, one, feature.unwrap_or(SENTINEL));
        SubsetPath { entries }
    }

    /// Returns the path with entry `index` unwound.
    pub fn unwind(&self, index: usize) -> Result<SubsetPath> {
        self.check_unwind(index)?;
        let mut entries = self.entries.clone();
        let depth = entries.len() - 1;
        unwind_path(&mut entries, depth, index);
        entries.pop();
        Ok(SubsetPath { entries })
    }

    /// Sum of the weights after unwinding entry `index`.
    pub fn unwound_sum(&self, index: usize) -> Result<f64> {
        self.check_unwind(index)?;
        Ok(unwound_path_sum(&self.entries, self.entries.len() - 1, index))
    }

    fn check_unwind(&self, index: usize) -> Result<()> {
        let e = self
            .entries
            .get(index)
            .ok_or_else(|| Error::Domain(format!("no path entry {index} to unwind")))?;
        if e.one == 0.0 && e.zero == 0.0 {
            return Err(Error::Domain(format!(
                "path entry {index} has zero one- and zero-fractions"
            )));
        }
        Ok(())
    }
}

/// Conditioning on one feature, used for interaction values. The feature
/// is removed from the players and its splits are either forced along the
/// explained row (`Present`) or cover-averaged (`Absent`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Condition {
    None,
    Present(usize),
    Absent(usize),
}

impl Condition {
    fn feature(self) -> Option<usize> {
        match self {
            Condition::None => None,
            Condition::Present(f) | Condition::Absent(f) => Some(f),
        }
    }
}

/// Path scratch space large enough for trees of depth `max_depth`.
pub(crate) fn scratch_for(max_depth: usize) -> Vec<PathEntry> {
    vec![PathEntry::EMPTY; (max_depth + 2) * (max_depth + 3) / 2 + 1]
}

struct Traversal<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    phi: &'a mut [f64],
    path: &'a mut [PathEntry],
    condition: Condition,
}

impl Traversal<'_> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        node: usize,
        depth: usize,
        parent_offset: usize,
        zero: f64,
        one: f64,
        parent_feature: usize,
        condition_fraction: f64,
    ) {
        if condition_fraction == 0.0 {
            return;
        }
        let offset = parent_offset + depth + 1;
        self.path
            .copy_within(parent_offset..parent_offset + depth + 1, offset);
        let cond_feature = self.condition.feature();
        if cond_feature != Some(parent_feature) {
            extend_path(&mut self.path[offset..], depth, zero, one, parent_feature);
        }
        let tree = self.tree;

        if tree.is_leaf(node) {
            let path = &self.path[offset..];
            let value = tree.value(node) * condition_fraction;
            for i in 1..=depth {
                let w = unwound_path_sum(path, depth, i);
                let e = path[i];
                self.phi[e.feature] += w * (e.one - e.zero) * value;
            }
            return;
        }

        let split = tree.feature(node);
        let hot = tree.next(node, self.x);
        let cold = if hot == tree.left(node) {
            tree.right(node)
        } else {
            tree.left(node)
        };
        let cover = tree.cover(node);
        let hot_zero = tree.cover(hot) / cover;
        let cold_zero = tree.cover(cold) / cover;

        // A feature already on the path is unwound and its fractions are
        // folded into this split's extension.
        let mut incoming_zero = 1.0;
        let mut incoming_one = 1.0;
        let mut depth = depth;
        if let Some(k) = (1..=depth).find(|&k| self.path[offset + k].feature == split) {
            let e = self.path[offset + k];
            incoming_zero = e.zero;
            incoming_one = e.one;
            unwind_path(&mut self.path[offset..], depth, k);
            depth -= 1;
        }

        let mut hot_fraction = condition_fraction;
        let mut cold_fraction = condition_fraction;
        let mut child_depth = depth + 1;
        match self.condition {
            Condition::Present(f) if f == split => {
                cold_fraction = 0.0;
                child_depth = depth;
            }
            Condition::Absent(f) if f == split => {
                hot_fraction *= hot_zero;
                cold_fraction *= cold_zero;
                child_depth = depth;
            }
            _ => {}
        }
        let extends = cond_feature != Some(split);

        let (hz, ho) = (hot_zero * incoming_zero, incoming_one);
        if !(extends && hz == 0.0 && ho == 0.0) {
            self.recurse(hot, child_depth, offset, hz, ho, split, hot_fraction);
        }
        let cz = cold_zero * incoming_zero;
        if !(extends && cz == 0.0) {
            self.recurse(cold, child_depth, offset, cz, 0.0, split, cold_fraction);
        }
    }
}

/// Adds the tree's attributions for `x` into `phi`.
pub(crate) fn tree_shap_into(
    tree: &Tree,
    x: &[f64],
    condition: Condition,
    phi: &mut [f64],
    scratch: &mut [PathEntry],
) {
    let mut t = Traversal {
        tree,
        x,
        phi,
        path: scratch,
        condition,
    };
    t.recurse(0, 0, 0, 1.0, 1.0, SENTINEL, 1.0);
}

pub(crate) fn ensemble_shap_into(
    ensemble: &TreeEnsemble,
    x: &[f64],
    condition: Condition,
    phi: &mut [f64],
    scratch: &mut [PathEntry],
) {
    for tree in ensemble.trees() {
        tree_shap_into(tree, x, condition, phi, scratch);
    }
}

/// Exact SHAP values of `x` with the cover-weighted conditional expectation
/// as the coalition value. The base value is the ensemble's expected value.
pub fn tree_shap(ensemble: &TreeEnsemble, x: &[f64]) -> Result<Explanation> {
    ensemble.check_row(x)?;
    let mut phi = vec![0.0; ensemble.num_features()];
    let mut scratch = scratch_for(ensemble.max_depth());
    ensemble_shap_into(ensemble, x, Condition::None, &mut phi, &mut scratch);
    Ok(Explanation::new(ensemble.expected_value(), phi, Method::TreeShap))
}

/// [`tree_shap`] over many rows, fanned out across the rayon pool.
pub fn tree_shap_batch(ensemble: &TreeEnsemble, rows: &[Vec<f64>]) -> Result<Vec<Explanation>> {
    rows.iter().try_for_each(|x| ensemble.check_row(x))?;
    let base = ensemble.expected_value();
    let depth = ensemble.max_depth();
    Ok(rows
        .par_iter()
        .enumerate()
        .map_init(
            || scratch_for(depth),
            |scratch, (i, x)| {
                let mut phi = vec![0.0; ensemble.num_features()];
                ensemble_shap_into(ensemble, x, Condition::None, &mut phi, scratch);
                Explanation::new(base, phi, Method::TreeShap).with_sample_index(i)
            },
        )
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::{and_model, k_way_and};
    use proptest::prelude::*;

    #[test]
    fn first_extension_has_unit_weight() {
        let p = SubsetPath::new().extend(1.0, 1.0, None);
        assert_eq!(p.weights(), [1.0]);
        assert_eq!(p.entries()[0].feature(), None);
    }

    #[test]
    fn second_extension_splits_evenly() {
        let p = SubsetPath::new().extend(1.0, 1.0, None).extend(1.0, 1.0, Some(3));
        assert_eq!(p.weights(), [0.5, 0.5]);
    }

    #[test]
    fn unwind_single_entry_empties() {
        let p = SubsetPath::new().extend(1.0, 1.0, None);
        assert!(p.unwind(0).unwrap().is_empty());
    }

    #[test]
    fn unwind_rejects_dead_entry() {
        let p = SubsetPath::new().extend(1.0, 1.0, None).extend(0.0, 0.0, Some(1));
        assert!(matches!(p.unwind(1), Err(Error::Domain(_))));
    }

    #[test]
    fn and_fixture() {
        let e = tree_shap(&and_model(), &[1.0, 1.0]).unwrap();
        assert_eq!(e.base, 20.0);
        assert!((e.values[0] - 30.0).abs() < 1e-12 && (e.values[1] - 30.0).abs() < 1e-12);
    }

    #[test]
    fn k_way_and_is_even() {
        for k in 2..=6 {
            let e = tree_shap(&k_way_and(k, 64.0), &vec![1.0; k]).unwrap();
            let first = e.values[0];
            assert!(e.values.iter().all(|v| (v - first).abs() < 1e-10), "{:?}", e.values);
        }
    }

    fn arb_path() -> impl Strategy<Value = SubsetPath> {
        prop::collection::vec((0.01f64..1.0, prop::bool::ANY), 0..6).prop_map(|steps| {
            let mut p = SubsetPath::new().extend(1.0, 1.0, None);
            for (i, (z, hot)) in steps.into_iter().enumerate() {
                p = p.extend(z, if hot { 1.0 } else { 0.0 }, Some(i));
            }
            p
        })
    }

    proptest! {
        #[test]
        fn unwind_inverts_extend(p in arb_path(), z in 0.01f64..1.0, hot in prop::bool::ANY) {
            let one = if hot { 1.0 } else { 0.0 };
            let q = p.extend(z, one, Some(99)).unwind(p.len()).unwrap();
            for (a, b) in q.entries().iter().zip(p.entries()) {
                prop_assert!((a.weight - b.weight).abs() <= 1e-12 * (1.0 + b.weight.abs()));
                prop_assert_eq!(a.feature, b.feature);
            }
            prop_assert_eq!(q.len(), p.len());
        }

        #[test]
        fn unwind_commutes(p in arb_path(), z1 in 0.01f64..1.0, z2 in 0.01f64..1.0, hot in prop::bool::ANY) {
            let one = if hot { 1.0 } else { 0.0 };
            let q = p.extend(z1, one, Some(100)).extend(z2, 1.0 - one, Some(101));
            let n = p.len();
            let a = q.unwind(n).unwrap().unwind(n).unwrap();
            let b = q.unwind(n + 1).unwrap().unwind(n).unwrap();
            for (x, y) in a.weights().iter().zip(b.weights()) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn weights_nonnegative(p in arb_path()) {
            prop_assert!(p.weights().iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn unwound_sum_matches_unwind(p in arb_path()) {
            for i in 1..p.len() {
                let s: f64 = p.unwind(i).unwrap().weights().iter().sum();
                let t = p.unwound_sum(i).unwrap();
                prop_assert!((s - t).abs() <= 1e-12 * (1.0 + s.abs()));
            }
        }
    }
}
