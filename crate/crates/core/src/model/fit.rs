use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{sigmoid, Dataset, Objective, Tree, TreeBuilder, TreeEnsemble};
use crate::error::{Error, Result};

/// Settings for gradient boosting. `Objective::Raw` minimizes squared
/// error; `Objective::Logistic` minimizes log loss on 0/1 labels with
/// Newton-step leaf values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub rounds: usize,
    pub depth: usize,
    pub learning_rate: f64,
    /// Fraction of rows sampled (without replacement) for each round.
    pub subsample: f64,
    pub min_child_count: usize,
    pub objective: Objective,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        Self {
            rounds: 100,
            depth: 4,
            learning_rate: 0.1,
            subsample: 1.0,
            min_child_count: 1,
            objective: Objective::Raw,
            seed: 0,
        }
    }
}

/// Fits an ensemble of depth-limited regression trees by greedy
/// second-order loss reduction with shrinkage. Covers are training row
/// counts and every split records its loss reduction as `gain`.
pub fn fit_boosted_trees(data: &Dataset, config: &BoostConfig) -> Result<TreeEnsemble> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::Data("boosting needs labels".into()))?;
    if data.is_empty() {
        return Err(Error::Data("cannot fit on an empty dataset".into()));
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(Error::Data("labels must be finite".into()));
    }
    let logistic = config.objective == Objective::Logistic;
    if logistic && labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Data("logistic boosting needs 0/1 labels".into()));
    }
    if config.rounds == 0 || !(config.subsample > 0.0 && config.subsample <= 1.0) {
        return Err(Error::InvalidInput("rounds must be positive and subsample in (0, 1]".into()));
    }
    let n = data.num_rows();
    let m = data.num_columns();
    let rows = data.rows();

    let sorted: Vec<Vec<u32>> = (0..m)
        .map(|f| {
            let mut idx: Vec<u32> = (0..n as u32).filter(|&i| !rows[i as usize][f].is_nan()).collect();
            idx.sort_by(|&a, &b| rows[a as usize][f].total_cmp(&rows[b as usize][f]));
            idx
        })
        .collect();

    let mean = labels.iter().sum::<f64>() / n as f64;
    let base = if logistic {
        let p = mean.clamp(1e-6, 1.0 - 1e-6);
        (p / (1.0 - p)).ln()
    } else {
        mean
    };
    let mut pred = vec![base; n];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trees = Vec::with_capacity(config.rounds);
    let mut residual = vec![0.0; n];
    let mut hessian = vec![1.0; n];
    let mut in_sample = vec![true; n];

    for _ in 0..config.rounds {
        for i in 0..n {
            if logistic {
                let p = sigmoid(pred[i]);
                residual[i] = labels[i] - p;
                hessian[i] = (p * (1.0 - p)).max(1e-12);
            } else {
                residual[i] = labels[i] - pred[i];
            }
        }
        if config.subsample < 1.0 {
            let k = ((n as f64 * config.subsample).round() as usize).max(1);
            in_sample.iter_mut().for_each(|s| *s = false);
            for i in rand::seq::index::sample(&mut rng, n, k) {
                in_sample[i] = true;
            }
        }
        let grower = Grower {
            rows,
            residual: &residual,
            hessian: &hessian,
            sorted: &sorted,
            config,
            num_features: m,
        };
        let tree = grower.grow(&in_sample);
        for (i, row) in rows.iter().enumerate() {
            pred[i] += tree.predict(row);
        }
        trees.push(tree);
    }
    let mut ensemble = TreeEnsemble::new(trees, m)?
        .with_base_offset(base)
        .with_objective(config.objective);
    if data.column_names().iter().any(|c| !c.is_empty()) {
        ensemble = ensemble.with_feature_names(data.column_names().to_vec())?;
    }
    Ok(ensemble)
}

struct Grower<'a> {
    rows: &'a [Vec<f64>],
    residual: &'a [f64],
    hessian: &'a [f64],
    sorted: &'a [Vec<u32>],
    config: &'a BoostConfig,
    num_features: usize,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    sum: f64,
    hess: f64,
    count: usize,
}

impl Stats {
    fn add(&mut self, g: f64, h: f64) {
        self.sum += g;
        self.hess += h;
        self.count += 1;
    }

    fn merged(self, o: Stats) -> Stats {
        Stats {
            sum: self.sum + o.sum,
            hess: self.hess + o.hess,
            count: self.count + o.count,
        }
    }

    fn minus(self, o: Stats) -> Stats {
        Stats {
            sum: self.sum - o.sum,
            hess: self.hess - o.hess,
            count: self.count - o.count,
        }
    }

    fn score(self) -> f64 {
        if self.count == 0 || self.hess <= 0.0 {
            0.0
        } else {
            self.sum * self.sum / self.hess
        }
    }
}

#[derive(Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    default_left: bool,
}

struct GrowNode {
    stats: Stats,
    split: Option<(Candidate, usize, usize)>,
}

impl Grower<'_> {
    fn grow(&self, in_sample: &[bool]) -> Tree {
        let n = self.rows.len();
        let mut nodes = vec![GrowNode {
            stats: Stats::default(),
            split: None,
        }];
        let mut node_of: Vec<usize> = (0..n).map(|i| if in_sample[i] { 0 } else { usize::MAX }).collect();
        for i in 0..n {
            if in_sample[i] {
                nodes[0].stats.add(self.residual[i], self.hessian[i]);
            }
        }
        let mut frontier = vec![0usize];
        for _ in 0..self.config.depth {
            if frontier.is_empty() {
                break;
            }
            let best = self.best_splits(&nodes, &frontier, &node_of);
            let mut next = Vec::new();
            for (slot, &id) in frontier.iter().enumerate() {
                let Some(c) = best[slot] else { continue };
                let l = nodes.len();
                nodes.push(GrowNode { stats: Stats::default(), split: None });
                nodes.push(GrowNode { stats: Stats::default(), split: None });
                nodes[id].split = Some((c, l, l + 1));
                next.push(l);
                next.push(l + 1);
            }
            for i in 0..n {
                let id = node_of[i];
                if id == usize::MAX {
                    continue;
                }
                if let Some((c, l, r)) = nodes[id].split {
                    let v = self.rows[i][c.feature];
                    let go_left = if v.is_nan() { c.default_left } else { v <= c.threshold };
                    let child = if go_left { l } else { r };
                    node_of[i] = child;
                    nodes[child].stats.add(self.residual[i], self.hessian[i]);
                }
            }
            frontier = next;
        }

        let mut b = TreeBuilder::new();
        let root = self.emit(&mut b, &nodes, 0);
        b.build(root, self.num_features).expect("grown tree is valid")
    }

    fn emit(&self, b: &mut TreeBuilder, nodes: &[GrowNode], id: usize) -> usize {
        match nodes[id].split {
            None => {
                let s = nodes[id].stats;
                let value = if s.count == 0 || s.hess <= 0.0 {
                    0.0
                } else {
                    self.config.learning_rate * s.sum / s.hess
                };
                b.leaf(value, s.count as f64)
            }
            Some((c, l, r)) => {
                let left = self.emit(b, nodes, l);
                let right = self.emit(b, nodes, r);
                b.split_full(c.feature, c.threshold, left, right, c.default_left, c.gain)
            }
        }
    }

    /// Best split per frontier node, scanning each feature's presorted rows once.
    fn best_splits(&self, nodes: &[GrowNode], frontier: &[usize], node_of: &[usize]) -> Vec<Option<Candidate>> {
        let mut slot_of = vec![usize::MAX; nodes.len()];
        for (s, &id) in frontier.iter().enumerate() {
            slot_of[id] = s;
        }
        let k = frontier.len();
        let min_child = self.config.min_child_count.max(1);
        let mut best: Vec<Option<Candidate>> = vec![None; k];
        let mut present = vec![Stats::default(); k];
        let mut left = vec![Stats::default(); k];
        let mut last = vec![f64::NAN; k];

        for f in 0..self.num_features {
            present.iter_mut().for_each(|s| *s = Stats::default());
            for &i in &self.sorted[f] {
                let id = node_of[i as usize];
                if id != usize::MAX && slot_of[id] != usize::MAX {
                    present[slot_of[id]].add(self.residual[i as usize], self.hessian[i as usize]);
                }
            }
            left.iter_mut().for_each(|s| *s = Stats::default());
            last.iter_mut().for_each(|v| *v = f64::NAN);
            for &i in &self.sorted[f] {
                let i = i as usize;
                let id = node_of[i];
                if id == usize::MAX || slot_of[id] == usize::MAX {
                    continue;
                }
                let s = slot_of[id];
                let v = self.rows[i][f];
                if left[s].count > 0 && v > last[s] {
                    let total = nodes[id].stats;
                    let missing = total.minus(present[s]);
                    let right = present[s].minus(left[s]);
                    let parent = total.score();
                    let threshold = 0.5 * (last[s] + v);
                    for default_left in [true, false] {
                        let (l, r) = if default_left {
                            (left[s].merged(missing), right)
                        } else {
                            (left[s], right.merged(missing))
                        };
                        if l.count < min_child || r.count < min_child {
                            continue;
                        }
                        let gain = l.score() + r.score() - parent;
                        let tol = 1e-12 * (1.0 + parent.abs());
                        if gain > tol && best[s].is_none_or(|b| gain > b.gain) {
                            best[s] = Some(Candidate {
                                gain,
                                feature: f,
                                threshold,
                                default_left,
                            });
                        }
                    }
                }
                left[s].add(self.residual[i], self.hessian[i]);
                last[s] = v;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64 / n as f64, ((i * 7) % n) as f64 / n as f64]).collect()
    }

    #[test]
    fn constant_zero_labels() {
        let rows = grid(50);
        let d = Dataset::from_rows(rows.clone()).unwrap().with_labels(vec![0.0; 50]).unwrap();
        let m = fit_boosted_trees(&d, &BoostConfig { rounds: 5, ..Default::default() }).unwrap();
        assert!(m.trees().iter().all(|t| t.len() == 1 && t.value(0) == 0.0));
        for row in &rows {
            assert_eq!(m.predict(row).unwrap(), 0.0);
        }
    }

    #[test]
    fn fits_identity_with_stumps() {
        let rows = grid(200);
        let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let d = Dataset::from_rows(rows.clone()).unwrap().with_labels(y.clone()).unwrap();
        let cfg = BoostConfig {
            rounds: 400,
            depth: 1,
            learning_rate: 0.3,
            ..Default::default()
        };
        let m = fit_boosted_trees(&d, &cfg).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
        let ss_res: f64 = rows
            .iter()
            .zip(&y)
            .map(|(r, v)| (m.predict(r).unwrap() - v).powi(2))
            .sum();
        assert!(1.0 - ss_res / ss_tot > 0.99);
    }

    #[test]
    fn covers_are_counts_and_missing_routed() {
        let mut rows = grid(40);
        rows[3][0] = f64::NAN;
        let y: Vec<f64> = rows.iter().map(|r| if r[0] > 0.5 { 1.0 } else { 0.0 }).collect();
        let d = Dataset::from_rows(rows).unwrap().with_labels(y).unwrap();
        let m = fit_boosted_trees(&d, &BoostConfig { rounds: 3, depth: 3, ..Default::default() }).unwrap();
        for t in m.trees() {
            assert_eq!(t.cover(0), 40.0);
            assert!(t.gain().is_some());
        }
    }

    #[test]
    fn logistic_boosting_separates_classes() {
        let rows = grid(200);
        let y: Vec<f64> = rows.iter().map(|r| (r[1] > 0.4) as u8 as f64).collect();
        let d = Dataset::from_rows(rows.clone()).unwrap().with_labels(y.clone()).unwrap();
        let cfg = BoostConfig {
            rounds: 50,
            depth: 2,
            learning_rate: 0.3,
            objective: Objective::Logistic,
            ..Default::default()
        };
        let m = fit_boosted_trees(&d, &cfg).unwrap();
        assert_eq!(m.objective(), Objective::Logistic);
        let correct = rows
            .iter()
            .zip(&y)
            .filter(|(r, &t)| (m.predict_output(r).unwrap() > 0.5) == (t == 1.0))
            .count();
        assert!(correct >= 198);
        let bad = Dataset::from_rows(grid(4)).unwrap().with_labels(vec![0.0, 2.0, 1.0, 0.0]).unwrap();
        assert!(fit_boosted_trees(&bad, &cfg).is_err());
    }

    #[test]
    fn empty_or_unlabelled_rejected() {
        let d = Dataset::from_rows(grid(5)).unwrap();
        assert!(fit_boosted_trees(&d, &BoostConfig::default()).is_err());
        let e = Dataset::new(vec!["a".into()], vec![], Some(vec![])).unwrap();
        assert!(fit_boosted_trees(&e, &BoostConfig::default()).is_err());
    }
}
