use crate::error::{Error, Result};

/// Sentinel child index marking a leaf.
pub const LEAF: i32 = -1;

/// A single regression tree stored as index-aligned node arrays.
///
/// Node 0 is the root. Internal nodes send `x[feature] <= threshold` to the
/// left child and everything else to the right; a missing (`NaN`) value
/// follows the default child. Only leaf values contribute to predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    children_left: Vec<i32>,
    children_right: Vec<i32>,
    children_default: Vec<i32>,
    split_feature: Vec<usize>,
    threshold: Vec<f64>,
    value: Vec<f64>,
    cover: Vec<f64>,
    gain: Option<Vec<f64>>,
    node_mean: Vec<f64>,
    max_depth: usize,
}

/// Raw node arrays as they appear in a model document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TreeParts {
    pub children_left: Vec<i64>,
    pub children_right: Vec<i64>,
    pub children_default: Vec<i64>,
    pub split_feature: Vec<i64>,
    pub threshold: Vec<f64>,
    pub value: Vec<f64>,
    pub cover: Vec<f64>,
    pub gain: Option<Vec<f64>>,
}

fn tree_err(node: usize, message: impl Into<String>) -> Error {
    Error::InvalidTree {
        tree: 0,
        node,
        message: message.into(),
    }
}

fn covers_add_up(left: f64, right: f64, parent: f64) -> bool {
    let sum = left + right;
    (sum - parent).abs() <= 1e-9 * parent.abs().max(sum.abs())
}

impl Tree {
    /// Validates the node arrays against `num_features` features.
    ///
    /// Errors carry tree index 0; [`crate::TreeEnsemble::new`] rewrites it
    /// to the tree's position in the ensemble.
    pub fn new(parts: TreeParts, num_features: usize) -> Result<Self> {
        let n = parts.children_left.len();
        if n == 0 {
            return Err(tree_err(0, "tree has no nodes"));
        }
        let lengths = [
            ("children_right", parts.children_right.len()),
            ("children_default", parts.children_default.len()),
            ("split_feature", parts.split_feature.len()),
            ("threshold", parts.threshold.len()),
            ("value", parts.value.len()),
            ("cover", parts.cover.len()),
        ];
        for (name, len) in lengths {
            if len != n {
                return Err(tree_err(
                    0,
                    format!("`{name}` has {len} entries but `children_left` has {n}"),
                ));
            }
        }
        if let Some(gain) = &parts.gain {
            if gain.len() != n {
                return Err(tree_err(
                    0,
                    format!("`gain` has {} entries but the tree has {n} nodes", gain.len()),
                ));
            }
        }

        let child = |j: usize, raw: i64, name: &str| -> Result<i32> {
            if raw == LEAF as i64 {
                return Ok(LEAF);
            }
            if raw < 1 || raw as usize >= n {
                return Err(tree_err(j, format!("{name} index {raw} out of range")));
            }
            Ok(raw as i32)
        };

        let mut children_left = Vec::with_capacity(n);
        let mut children_right = Vec::with_capacity(n);
        let mut children_default = Vec::with_capacity(n);
        let mut split_feature = Vec::with_capacity(n);
        let mut parents = vec![0usize; n];

        for j in 0..n {
            let left = child(j, parts.children_left[j], "left child")?;
            let right = child(j, parts.children_right[j], "right child")?;
            if (left == LEAF) != (right == LEAF) {
                return Err(tree_err(j, "exactly one child is the leaf sentinel"));
            }
            if left == LEAF {
                if !parts.value[j].is_finite() {
                    return Err(tree_err(j, "leaf value is not finite"));
                }
                if !(parts.cover[j] >= 0.0 && parts.cover[j].is_finite()) {
                    return Err(tree_err(j, "leaf cover must be finite and nonnegative"));
                }
                children_left.push(LEAF);
                children_right.push(LEAF);
                children_default.push(LEAF);
                split_feature.push(0);
                continue;
            }
            if left == right {
                return Err(tree_err(j, "left and right children coincide"));
            }
            let default = parts.children_default[j];
            if default != left as i64 && default != right as i64 {
                return Err(tree_err(
                    j,
                    format!("default child {default} is neither the left nor the right child"),
                ));
            }
            let feature = parts.split_feature[j];
            if feature < 0 || feature as usize >= num_features {
                return Err(tree_err(
                    j,
                    format!("split feature {feature} out of range for {num_features} features"),
                ));
            }
            if parts.threshold[j].is_nan() {
                return Err(tree_err(j, "threshold is NaN"));
            }
            let cover = parts.cover[j];
            if !(cover > 0.0 && cover.is_finite()) {
                return Err(tree_err(j, "internal node cover must be positive"));
            }
            let (lc, rc) = (parts.cover[left as usize], parts.cover[right as usize]);
            if !covers_add_up(lc, rc, cover) {
                return Err(tree_err(
                    j,
                    format!("children covers {lc} + {rc} do not add up to {cover}"),
                ));
            }
            parents[left as usize] += 1;
            parents[right as usize] += 1;
            children_left.push(left);
            children_right.push(right);
            children_default.push(default as i32);
            split_feature.push(feature as usize);
        }

        if let Some(j) = (1..n).find(|&j| parents[j] != 1) {
            return Err(tree_err(
                j,
                format!("node has {} parents, expected exactly one", parents[j]),
            ));
        }

        // Every non-root node has one parent; reachability rules out cycles.
        let mut seen = vec![false; n];
        let mut depth = vec![0usize; n];
        let mut order = Vec::with_capacity(n);
        let mut stack = vec![0usize];
        while let Some(j) = stack.pop() {
            if seen[j] {
                return Err(tree_err(j, "node reached twice"));
            }
            seen[j] = true;
            order.push(j);
            if children_left[j] != LEAF {
                for c in [children_left[j] as usize, children_right[j] as usize] {
                    depth[c] = depth[j] + 1;
                    stack.push(c);
                }
            }
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(tree_err(j, "node is not reachable from the root"));
        }

        let mut node_mean = vec![0.0; n];
        for &j in order.iter().rev() {
            node_mean[j] = if children_left[j] == LEAF {
                parts.value[j]
            } else {
                let (l, r) = (children_left[j] as usize, children_right[j] as usize);
                (node_mean[l] * parts.cover[l] + node_mean[r] * parts.cover[r]) / parts.cover[j]
            };
        }
        let max_depth = depth.iter().copied().max().unwrap_or(0);

        Ok(Self {
            children_left,
            children_right,
            children_default,
            split_feature,
            threshold: parts.threshold,
            value: parts.value,
            cover: parts.cover,
            gain: parts.gain,
            node_mean,
            max_depth,
        })
    }

    /// A tree with a single leaf.
    pub fn leaf(value: f64, cover: f64) -> Self {
        Self::new(
            TreeParts {
                children_left: vec![-1],
                children_right: vec![-1],
                children_default: vec![-1],
                split_feature: vec![-1],
                threshold: vec![0.0],
                value: vec![value],
                cover: vec![cover],
                gain: None,
            },
            0,
        )
        .expect("single leaf is a valid tree")
    }

    pub fn to_parts(&self) -> TreeParts {
        TreeParts {
            children_left: self.children_left.iter().map(|&c| c as i64).collect(),
            children_right: self.children_right.iter().map(|&c| c as i64).collect(),
            children_default: self.children_default.iter().map(|&c| c as i64).collect(),
            split_feature: (0..self.len())
                .map(|j| if self.is_leaf(j) { -1 } else { self.split_feature[j] as i64 })
                .collect(),
            threshold: self.threshold.clone(),
            value: self.value.clone(),
            cover: self.cover.clone(),
            gain: self.gain.clone(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.children_left.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.children_left.is_empty()
    }

    #[inline]
    pub fn is_leaf(&self, node: usize) -> bool {
        self.children_left[node] == LEAF
    }

    #[inline]
    pub fn left(&self, node: usize) -> usize {
        self.children_left[node] as usize
    }

    #[inline]
    pub fn right(&self, node: usize) -> usize {
        self.children_right[node] as usize
    }

    #[inline]
    pub fn default_child(&self, node: usize) -> usize {
        self.children_default[node] as usize
    }

    #[inline]
    pub fn feature(&self, node: usize) -> usize {
        self.split_feature[node]
    }

    #[inline]
    pub fn threshold(&self, node: usize) -> f64 {
        self.threshold[node]
    }

    #[inline]
    pub fn value(&self, node: usize) -> f64 {
        self.value[node]
    }

    #[inline]
    pub fn cover(&self, node: usize) -> f64 {
        self.cover[node]
    }

    pub fn gain(&self) -> Option<&[f64]> {
        self.gain.as_deref()
    }

    /// Cover-weighted mean of the leaf values below `node`.
    #[inline]
    pub fn node_mean(&self, node: usize) -> f64 {
        self.node_mean[node]
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    /// The child a row follows at internal node `node`.
    #[inline]
    pub fn next(&self, node: usize, x: &[f64]) -> usize {
        let v = x[self.split_feature[node]];
        if v.is_nan() {
            self.default_child(node)
        } else if v <= self.threshold[node] {
            self.left(node)
        } else {
            self.right(node)
        }
    }

    /// Index of the leaf reached by `x`.
    #[inline]
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut node = 0;
        while !self.is_leaf(node) {
            node = self.next(node, x);
        }
        node
    }

    #[inline]
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.value[self.leaf_index(x)]
    }

    /// Cover-weighted mean leaf value, i.e. the tree's expected output.
    pub fn expected_value(&self) -> f64 {
        self.node_mean[0]
    }

    /// Features used by at least one split, ascending and deduplicated.
    pub fn used_features(&self) -> Vec<usize> {
        let mut used: Vec<usize> = (0..self.len())
            .filter(|&j| !self.is_leaf(j))
            .map(|j| self.split_feature[j])
            .collect();
        used.sort_unstable();
        used.dedup();
        used
    }

    pub(crate) fn with_tree_index(err: Error, tree: usize) -> Error {
        match err {
            Error::InvalidTree { node, message, .. } => Error::InvalidTree {
                tree,
                node,
                message,
            },
            other => other,
        }
    }
}

/// Incrementally assembles a tree bottom-up; covers of split nodes are the
/// sums of their children's covers.
///
/// ```
/// use arbor_core::model::TreeBuilder;
/// let mut b = TreeBuilder::new();
/// let lo = b.leaf(0.0, 2.0);
/// let hi = b.leaf(1.0, 2.0);
/// let root = b.split(0, 0.5, lo, hi);
/// let tree = b.build(root, 1).unwrap();
/// assert_eq!(tree.expected_value(), 0.5);
/// ```
#[derive(Debug, Default, Clone)]
pub struct TreeBuilder {
    nodes: Vec<BuilderNode>,
}

#[derive(Debug, Clone)]
enum BuilderNode {
    Leaf {
        value: f64,
        cover: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
        gain: f64,
        cover: f64,
    },
}

impl TreeBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn leaf(&mut self, value: f64, cover: f64) -> usize {
        self.nodes.push(BuilderNode::Leaf { value, cover });
        self.nodes.len() - 1
    }

    /// Adds a split whose missing values go left.
    pub fn split(&mut self, feature: usize, threshold: f64, left: usize, right: usize) -> usize {
        self.split_full(feature, threshold, left, right, true, 0.0)
    }

    pub fn split_full(
        &mut self,
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        default_left: bool,
        gain: f64,
    ) -> usize {
        let cover = self.cover(left) + self.cover(right);
        self.nodes.push(BuilderNode::Split {
            feature,
            threshold,
            left,
            right,
            default_left,
            gain,
            cover,
        });
        self.nodes.len() - 1
    }

    fn cover(&self, id: usize) -> f64 {
        match self.nodes[id] {
            BuilderNode::Leaf { cover, .. } | BuilderNode::Split { cover, .. } => cover,
        }
    }

    /// Lays the subtree rooted at `root` out in preorder and validates it.
    pub fn build(&self, root: usize, num_features: usize) -> Result<Tree> {
        let mut order = Vec::new();
        let mut stack = vec![root];
        while let Some(id) = stack.pop() {
            order.push(id);
            if let BuilderNode::Split { left, right, .. } = self.nodes[id] {
                stack.push(right);
                stack.push(left);
            }
        }
        let mut position = vec![usize::MAX; self.nodes.len()];
        for (pos, &id) in order.iter().enumerate() {
            position[id] = pos;
        }
        let mut parts = TreeParts::default();
        let mut gains = Vec::with_capacity(order.len());
        for &id in &order {
            match self.nodes[id] {
                BuilderNode::Leaf { value, cover } => {
                    parts.children_left.push(-1);
                    parts.children_right.push(-1);
                    parts.children_default.push(-1);
                    parts.split_feature.push(-1);
                    parts.threshold.push(0.0);
                    parts.value.push(value);
                    parts.cover.push(cover);
                    gains.push(0.0);
                }
                BuilderNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    default_left,
                    gain,
                    cover,
                } => {
                    let (l, r) = (position[left] as i64, position[right] as i64);
                    parts.children_left.push(l);
                    parts.children_right.push(r);
                    parts.children_default.push(if default_left { l } else { r });
                    parts.split_feature.push(feature as i64);
                    parts.threshold.push(threshold);
                    parts.value.push(0.0);
                    parts.cover.push(cover);
                    gains.push(gain);
                }
            }
        }
        parts.gain = Some(gains);
        Tree::new(parts, num_features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump_parts() -> TreeParts {
        TreeParts {
            children_left: vec![1, -1, -1],
            children_right: vec![2, -1, -1],
            children_default: vec![2, -1, -1],
            split_feature: vec![0, -1, -1],
            threshold: vec![0.5, 0.0, 0.0],
            value: vec![0.0, -1.0, 3.0],
            cover: vec![4.0, 1.0, 3.0],
            gain: None,
        }
    }

    #[test]
    fn stump_routes_ties_left_and_missing_default() {
        let tree = Tree::new(stump_parts(), 1).unwrap();
        assert_eq!(tree.predict(&[0.5]), -1.0);
        assert_eq!(tree.predict(&[0.51]), 3.0);
        assert_eq!(tree.predict(&[f64::NAN]), 3.0);
        assert_eq!(tree.expected_value(), (-1.0 + 9.0) / 4.0);
        assert_eq!(tree.max_depth(), 1);
    }

    #[test]
    fn rejects_cover_mismatch() {
        let mut parts = stump_parts();
        parts.cover[2] = 2.0;
        let err = Tree::new(parts, 1).unwrap_err();
        assert!(matches!(err, Error::InvalidTree { node: 0, .. }), "{err}");
    }

    #[test]
    fn rejects_half_leaf() {
        let mut parts = stump_parts();
        parts.children_right[0] = -1;
        assert!(Tree::new(parts, 1).is_err());
    }

    #[test]
    fn rejects_bad_default() {
        let mut parts = stump_parts();
        parts.children_default[0] = 0;
        assert!(Tree::new(parts, 1).is_err());
    }

    #[test]
    fn rejects_feature_out_of_range() {
        assert!(Tree::new(stump_parts(), 0).is_err());
    }

    #[test]
    fn rejects_shared_child() {
        let parts = TreeParts {
            children_left: vec![1, 3, -1, -1],
            children_right: vec![2, 3, -1, -1],
            children_default: vec![1, 3, -1, -1],
            split_feature: vec![0, 0, -1, -1],
            threshold: vec![0.0; 4],
            value: vec![0.0; 4],
            cover: vec![2.0, 1.0, 1.0, 0.5],
            gain: None,
        };
        assert!(Tree::new(parts, 1).is_err());
    }

    #[test]
    fn rejects_unreachable_cycle() {
        // nodes 3 and 4 point at each other and hang off nothing
        let parts = TreeParts {
            children_left: vec![1, -1, -1, 4, 3],
            children_right: vec![2, -1, -1, 2, 1],
            children_default: vec![1, -1, -1, 4, 3],
            split_feature: vec![0, -1, -1, 0, 0],
            threshold: vec![0.0; 5],
            value: vec![0.0; 5],
            cover: vec![2.0, 1.0, 1.0, 2.0, 2.0],
            gain: None,
        };
        assert!(Tree::new(parts, 1).is_err());
    }

    #[test]
    fn builder_lays_out_preorder() {
        let mut b = TreeBuilder::new();
        let a = b.leaf(1.0, 1.0);
        let c = b.leaf(2.0, 3.0);
        let root = b.split(0, 0.0, a, c);
        let tree = b.build(root, 1).unwrap();
        assert_eq!(tree.len(), 3);
        assert_eq!(tree.cover(0), 4.0);
        assert_eq!(tree.left(0), 1);
        assert_eq!(tree.value(tree.right(0)), 2.0);
    }
}
