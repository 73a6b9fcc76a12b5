//! Small hand-built models with known explanations.

use super::{Tree, TreeBuilder, TreeEnsemble};

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

fn single_tree(tree: Tree, feature_names: &[&str]) -> TreeEnsemble {
    TreeEnsemble::new(vec![tree], feature_names.len())
        .and_then(|m| m.with_feature_names(names(feature_names)))
        .expect("fixture is valid")
}

/// Two binary features (`fever`, `cough`), output 80 only when both are
/// true. Fever is split at the root; covers are 4 / 2 / 2 / 1 / 1, so the
/// expected output is 20. Gains are the squared-error reductions on the
/// four uniformly weighted input combinations.
pub fn and_model() -> TreeEnsemble {
    let mut b = TreeBuilder::new();
    let no_fever = b.leaf(0.0, 2.0);
    let fever_only = b.leaf(0.0, 1.0);
    let both = b.leaf(80.0, 1.0);
    let cough = b.split_full(1, 0.5, fever_only, both, true, 3200.0);
    let root = b.split_full(0, 0.5, no_fever, cough, true, 1600.0);
    single_tree(b.build(root, 2).expect("valid"), &["fever", "cough"])
}

/// The companion model where cough matters more: 90 when both are true,
/// 10 for cough alone. Cough is split at the root; expected output 25.
pub fn and_model_b() -> TreeEnsemble {
    let mut b = TreeBuilder::new();
    let no_cough = b.leaf(0.0, 2.0);
    let cough_only = b.leaf(10.0, 1.0);
    let both = b.leaf(90.0, 1.0);
    let fever = b.split_full(0, 0.5, cough_only, both, true, 3200.0);
    let root = b.split_full(1, 0.5, no_cough, fever, true, 2500.0);
    single_tree(b.build(root, 2).expect("valid"), &["fever", "cough"])
}

/// A chain tree over `k` binary features that outputs `value` only when all
/// features exceed 0.5. Feature 0 is split at the root, feature `k-1` last;
/// every split sends half of its cover each way.
pub fn k_way_and(k: usize, value: f64) -> TreeEnsemble {
    assert!(k >= 1);
    let mut b = TreeBuilder::new();
    let leaf_cover = 1.0;
    let mut node = b.leaf(value, leaf_cover);
    let mut cover = leaf_cover;
    for feature in (0..k).rev() {
        let off = b.leaf(0.0, cover);
        node = b.split(feature, 0.5, off, node);
        cover *= 2.0;
    }
    let tree = b.build(node, k).expect("valid");
    TreeEnsemble::new(vec![tree], k).expect("valid")
}

/// Fully developed tree over binary features split in `order`, covers from
/// independent Bernoulli features with `P(x_i = 1) = p[i]`, leaf values
/// `scale * g(bits)`.
pub fn full_binary_tree(
    order: &[usize],
    num_features: usize,
    p: &[f64],
    root_cover: f64,
    scale: f64,
    g: &dyn Fn(&[bool]) -> f64,
) -> Tree {
    fn rec(
        b: &mut TreeBuilder,
        order: &[usize],
        bits: &mut Vec<bool>,
        p: &[f64],
        cover: f64,
        scale: f64,
        g: &dyn Fn(&[bool]) -> f64,
    ) -> usize {
        match order.split_first() {
            None => b.leaf(scale * g(bits), cover),
            Some((&f, rest)) => {
                bits[f] = false;
                let lo = rec(b, rest, bits, p, cover * (1.0 - p[f]), scale, g);
                bits[f] = true;
                let hi = rec(b, rest, bits, p, cover * p[f], scale, g);
                bits[f] = false;
                b.split(f, 0.5, lo, hi)
            }
        }
    }
    let mut b = TreeBuilder::new();
    let mut bits = vec![false; num_features];
    let root = rec(&mut b, order, &mut bits, p, root_cover, scale, g);
    b.build(root, num_features).expect("valid")
}

/// One fully developed tree per ordering of three binary features, each
/// computing `g / 6` under uniform covers. The ensemble computes `g`.
pub fn ordering_complete_ensemble(g: &dyn Fn(&[bool]) -> f64) -> TreeEnsemble {
    const ORDERS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let trees = ORDERS
        .iter()
        .map(|order| full_binary_tree(order, 3, &[0.5; 3], 8.0, 1.0 / 6.0, g))
        .collect();
    TreeEnsemble::new(trees, 3).expect("valid")
}

/// The four sickness-score scenario models over `fever`, `cough` and an
/// unused `headache` feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    And,
    Or,
    Xor,
    Sum,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [Self::And, Self::Or, Self::Xor, Self::Sum];

    pub fn name(self) -> &'static str {
        match self {
            Self::And => "AND",
            Self::Or => "OR",
            Self::Xor => "XOR",
            Self::Sum => "SUM",
        }
    }

    /// Each of fever and cough adds 2; the nonlinear term adds 6.
    pub fn score(self, fever: bool, cough: bool) -> f64 {
        let linear = 2.0 * fever as u8 as f64 + 2.0 * cough as u8 as f64;
        let bonus = match self {
            Self::And => fever && cough,
            Self::Or => fever || cough,
            Self::Xor => fever != cough,
            Self::Sum => false,
        };
        linear + if bonus { 6.0 } else { 0.0 }
    }
}

/// Rate of each symptom in the healthy reference population the scenario
/// trees' covers are drawn from. Small enough that the population is, to
/// within rounding, the all-false reference.
pub const HEALTHY_SYMPTOM_RATE: f64 = 1e-12;

/// Depth-two tree (fever, then cough) computing the scenario score, with
/// covers from a healthy population.
pub fn scenario_model(kind: ScenarioKind) -> TreeEnsemble {
    let p = [HEALTHY_SYMPTOM_RATE; 3];
    let tree = full_binary_tree(&[0, 1], 3, &p, 1.0, 1.0, &|bits: &[bool]| {
        kind.score(bits[0], bits[1])
    });
    single_tree(tree, &["fever", "cough", "headache"])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn and_model_anchor_values() {
        let m = and_model();
        assert_eq!(m.expected_value(), 20.0);
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 80.0);
        assert_eq!(m.predict(&[0.0, 1.0]).unwrap(), 0.0);
        let t = &m.trees()[0];
        assert_eq!(
            (0..t.len()).map(|j| t.cover(j)).collect::<Vec<_>>(),
            [4.0, 2.0, 2.0, 1.0, 1.0]
        );
    }

    #[test]
    fn model_b_anchor_values() {
        let m = and_model_b();
        assert_eq!(m.expected_value(), 25.0);
        assert_eq!(m.predict(&[1.0, 1.0]).unwrap(), 90.0);
    }

    #[test]
    fn k_way_and_values() {
        let m = k_way_and(4, 16.0);
        assert_eq!(m.predict(&[1.0; 4]).unwrap(), 16.0);
        assert_eq!(m.predict(&[1.0, 1.0, 0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(m.expected_value(), 1.0);
    }

    #[test]
    fn ordering_complete_sums_to_g() {
        let g = |b: &[bool]| 3.0 * b[0] as u8 as f64 + (b[1] && b[2]) as u8 as f64 * 5.0;
        let m = ordering_complete_ensemble(&g);
        assert_eq!(m.trees().len(), 6);
        let out = m.predict(&[1.0, 1.0, 1.0]).unwrap();
        assert!((out - 8.0).abs() < 1e-12);
    }

    #[test]
    fn scenario_scores() {
        assert_eq!(ScenarioKind::And.score(true, true), 10.0);
        assert_eq!(ScenarioKind::Or.score(false, true), 8.0);
        assert_eq!(ScenarioKind::Xor.score(true, true), 4.0);
        assert_eq!(ScenarioKind::Sum.score(true, false), 2.0);
        let m = scenario_model(ScenarioKind::Xor);
        assert_eq!(m.predict(&[1.0, 0.0, 1.0]).unwrap(), 8.0);
    }
}
