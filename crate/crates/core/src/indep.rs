//! Interventional Shapley values against single references, averaged over
//! a background set, plus explanations of a model's loss.
//!
//! For one foreground row `x` and one reference `c`, the coalition game is
//! `v(S) = f(x on S, c elsewhere)`. A tree only depends on the features it
//! splits on where `x` and `c` disagree, so a single traversal that follows
//! hybrid paths computes the exact Shapley values in `O(L)` per tree.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::model::{sigmoid, Dataset, Objective, Tree, TreeEnsemble};

/// Reference rows the foreground is compared against.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSet {
    rows: Vec<Vec<f64>>,
    weights: Option<Vec<f64>>,
}

impl BackgroundSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let first = rows.first().ok_or(Error::EmptyBackground)?;
        let m = first.len();
        if let Some(r) = rows.iter().find(|r| r.len() != m) {
            return Err(Error::Dimension { expected: m, got: r.len() });
        }
        Ok(Self { rows, weights: None })
    }

    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        Self::new(data.rows().to_vec())
    }

    /// Attaches nonnegative weights, normalized to sum to one.
    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.rows.len() {
            return Err(Error::Dimension {
                expected: self.rows.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidInput("background weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidInput("background weights sum to zero".into()));
        }
        self.weights = Some(weights.into_iter().map(|w| w / total).collect());
        Ok(self)
    }

    /// First `n` rows (all of them if fewer).
    pub fn truncated(&self, n: usize) -> Result<Self> {
        let rows = self.rows.iter().take(n).cloned().collect();
        let bg = Self::new(rows)?;
        match &self.weights {
            Some(w) => bg.with_weights(w[..n.min(w.len())].to_vec()),
            None => Ok(bg),
        }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.rows[0].len()
    }

    /// Normalized weight of reference `i`.
    pub fn weight(&self, i: usize) -> f64 {
        match &self.weights {
            Some(w) => w[i],
            None => 1.0 / self.rows.len() as f64,
        }
    }

    fn check(&self, ensemble: &TreeEnsemble) -> Result<()> {
        if self.num_features() != ensemble.num_features() {
            return Err(Error::Dimension {
                expected: ensemble.num_features(),
                got: self.num_features(),
            });
        }
        Ok(())
    }
}

/// Shapley weight `U! (V-U-1)! / V!` of a coalition of `U` out of `V`
/// players, excluding the player being credited.
pub fn calc_weight(u: usize, v: usize) -> Result<f64> {
    if u >= v {
        return Err(Error::Domain(format!("calc_weight needs U < V, got U={u} V={v}")));
    }
    Ok(weight_unchecked(u, v))
}

fn weight_unchecked(u: usize, v: usize) -> f64 {
    // 1 / (V * C(V-1, U))
    let k = u.min(v - 1 - u);
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (v - 1 - i) as f64 / (i + 1) as f64;
    }
    1.0 / (v as f64 * binom)
}

/// Lookup table `w[V][U]` for all `U < V <= max`.
struct WeightTable {
    w: Vec<Vec<f64>>,
}

impl WeightTable {
    fn new(max: usize) -> Self {
        let w = (0..=max)
            .map(|v| (0..v).map(|u| weight_unchecked(u, v)).collect())
            .collect();
        Self { w }
    }

    #[inline]
    fn get(&self, u: usize, v: usize) -> f64 {
        self.w[v][u]
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Unseen,
    X,
    Reference,
}

struct Walk<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    c: &'a [f64],
    side: &'a mut [Side],
    phi: &'a mut [f64],
    table: &'a WeightTable,
}

impl Walk<'_> {
    /// Returns the (positive, negative) contributions of the subtree at
    /// `node` given `u` features on the x side out of `v` on the path.
    fn recurse(&mut self, node: usize, u: usize, v: usize) -> (f64, f64) {
        let tree = self.tree;
        if tree.is_leaf(node) {
            let value = tree.value(node);
            let pos = if u != 0 { self.table.get(u - 1, v) * value } else { 0.0 };
            let neg = if u != v { -self.table.get(u, v) * value } else { 0.0 };
            return (pos, neg);
        }
        let f = tree.feature(node);
        let x_next = tree.next(node, self.x);
        let c_next = tree.next(node, self.c);
        let forced = match self.side[f] {
            Side::X => Some(x_next),
            Side::Reference => Some(c_next),
            Side::Unseen if x_next == c_next => Some(x_next),
            Side::Unseen => None,
        };
        if let Some(k) = forced {
            return self.recurse(k, u, v);
        }

        self.side[f] = Side::X;
        let (pos_x, neg_x) = self.recurse(x_next, u + 1, v + 1);
        self.side[f] = Side::Reference;
        let (pos_c, neg_c) = self.recurse(c_next, u, v + 1);
        self.side[f] = Side::Unseen;

        self.phi[f] += pos_x + neg_c;
        (pos_x + pos_c, neg_x + neg_c)
    }
}

/// Adds the single-reference attributions of every tree into `phi`.
fn single_reference(
    ensemble: &TreeEnsemble,
    x: &[f64],
    c: &[f64],
    table: &WeightTable,
    side: &mut [Side],
    phi: &mut [f64],
) {
    for tree in ensemble.trees() {
        let mut walk = Walk {
            tree,
            x,
            c,
            side,
            phi,
            table,
        };
        walk.recurse(0, 0, 0);
    }
}

fn table_for(ensemble: &TreeEnsemble) -> WeightTable {
    WeightTable::new(ensemble.max_depth().min(ensemble.num_features()) + 1)
}

/// Per-reference attributions, each scaled by `scale(i, &phi)` before the
/// weighted reduction. Fans out over references.
fn reduce_references<F>(ensemble: &TreeEnsemble, x: &[f64], bg: &BackgroundSet, table: &WeightTable, scale: F) -> Vec<f64>
where
    F: Fn(usize, &[f64]) -> f64 + Sync,
{
    let m = ensemble.num_features();
    (0..bg.len())
        .into_par_iter()
        .fold(
            || (vec![0.0; m], vec![Side::Unseen; m], vec![0.0; m]),
            |(mut acc, mut side, mut phi), i| {
                phi.iter_mut().for_each(|p| *p = 0.0);
                single_reference(ensemble, x, &bg.rows[i], table, &mut side, &mut phi);
                let s = bg.weight(i) * scale(i, &phi);
                for (a, p) in acc.iter_mut().zip(&phi) {
                    *a += s * p;
                }
                (acc, side, phi)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(|| vec![0.0; m], |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        })
}

/// Shapley values of `x` under feature independence, averaged over the
/// background set. The base is the weighted mean prediction (margin) of the
/// references.
pub fn independent_tree_shap(ensemble: &TreeEnsemble, x: &[f64], bg: &BackgroundSet) -> Result<Explanation> {
    ensemble.check_row(x)?;
    bg.check(ensemble)?;
    let table = table_for(ensemble);
    let values = reduce_references(ensemble, x, bg, &table, |_, _| 1.0);
    let base = (0..bg.len()).map(|i| bg.weight(i) * ensemble.margin(&bg.rows[i])).sum();
    Ok(Explanation::new(base, values, Method::Independent))
}

/// [`independent_tree_shap`] for many rows, parallel over rows.
pub fn independent_tree_shap_batch(
    ensemble: &TreeEnsemble,
    rows: &[Vec<f64>],
    bg: &BackgroundSet,
) -> Result<Vec<Explanation>> {
    bg.check(ensemble)?;
    rows.iter().try_for_each(|x| ensemble.check_row(x))?;
    let table = table_for(ensemble);
    let m = ensemble.num_features();
    let base: f64 = (0..bg.len()).map(|i| bg.weight(i) * ensemble.margin(&bg.rows[i])).sum();
    Ok(rows
        .par_iter()
        .enumerate()
        .map(|(n, x)| {
            let mut side = vec![Side::Unseen; m];
            let mut phi = vec![0.0; m];
            let mut acc = vec![0.0; m];
            for (i, c) in bg.rows.iter().enumerate() {
                phi.iter_mut().for_each(|p| *p = 0.0);
                single_reference(ensemble, x, c, &table, &mut side, &mut phi);
                let w = bg.weight(i);
                acc.iter_mut().zip(&phi).for_each(|(a, p)| *a += w * p);
            }
            Explanation::new(base, acc, Method::Independent).with_sample_index(n)
        })
        .collect())
}

/// Loss functions whose per-sample value can be explained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `(output - y)^2` on the model's transformed output.
    SquaredError,
    /// Negative log-likelihood of a logistic model's margin.
    LogisticNll,
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "squared_error" | "squared-error" => Ok(LossKind::SquaredError),
            "logistic_nll" | "logistic-nll" | "log_loss" => Ok(LossKind::LogisticNll),
            other => Err(Error::Unsupported(format!("loss `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    pub label: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, label: f64) -> Self {
        Self { kind, label }
    }

    fn validate(&self, objective: Objective) -> Result<()> {
        if !self.label.is_finite() {
            return Err(Error::Domain("loss label must be finite".into()));
        }
        if self.kind == LossKind::LogisticNll {
            if objective != Objective::Logistic {
                return Err(Error::Unsupported(
                    "logistic_nll needs a model with the logistic objective".into(),
                ));
            }
            if self.label != 0.0 && self.label != 1.0 {
                return Err(Error::Domain(format!("logistic_nll label must be 0 or 1, got {}", self.label)));
            }
        }
        Ok(())
    }

    /// Loss as a function of the margin.
    pub fn loss(&self, objective: Objective, margin: f64) -> f64 {
        let y = self.label;
        match self.kind {
            LossKind::SquaredError => (objective.transform(margin) - y).powi(2),
            // log(1 + e^f) - y f, evaluated stably
            LossKind::LogisticNll => margin.max(0.0) + (-margin.abs()).exp().ln_1p() - y * margin,
        }
    }

    /// Derivative of [`LossSpec::loss`] with respect to the margin.
    pub fn derivative(&self, objective: Objective, margin: f64) -> f64 {
        let y = self.label;
        match self.kind {
            LossKind::SquaredError => {
                let out = objective.transform(margin);
                let chain = match objective {
                    Objective::Raw => 1.0,
                    Objective::Logistic => out * (1.0 - out),
                };
                2.0 * (out - y) * chain
            }
            LossKind::LogisticNll => sigmoid(margin) - y,
        }
    }
}

const RESCALE_EPS: f64 = 1e-6;

/// Attributions of the per-sample loss. Each reference's margin
/// attributions are rescaled so they sum to `g(f(x)) - g(f(r))`; when
/// `f(x)` and `f(r)` are within 1e-6 the derivative `g'(f(x))` is used as
/// the multiplier instead. The base is the weighted mean reference loss.
pub fn explain_loss(ensemble: &TreeEnsemble, x: &[f64], loss: LossSpec, bg: &BackgroundSet) -> Result<Explanation> {
    ensemble.check_row(x)?;
    bg.check(ensemble)?;
    let objective = ensemble.objective();
    loss.validate(objective)?;
    let table = table_for(ensemble);
    let fx = ensemble.margin(x);
    let gx = loss.loss(objective, fx);
    let ref_margin: Vec<f64> = bg.rows.iter().map(|r| ensemble.margin(r)).collect();
    let values = reduce_references(ensemble, x, bg, &table, |i, _| {
        let fr = ref_margin[i];
        let df = fx - fr;
        if df.abs() < RESCALE_EPS {
            loss.derivative(objective, fx)
        } else {
            (gx - loss.loss(objective, fr)) / df
        }
    });
    let base = ref_margin
        .iter()
        .enumerate()
        .map(|(i, &fr)| bg.weight(i) * loss.loss(objective, fr))
        .sum();
    Ok(Explanation::new(base, values, Method::Independent))
}

/// [`explain_loss`] for many labelled rows.
pub fn explain_loss_batch(
    ensemble: &TreeEnsemble,
    rows: &[Vec<f64>],
    labels: &[f64],
    kind: LossKind,
    bg: &BackgroundSet,
) -> Result<Vec<Explanation>> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    rows.par_iter()
        .zip(labels)
        .enumerate()
        .map(|(i, (x, &y))| explain_loss(ensemble, x, LossSpec::new(kind, y), bg).map(|e| e.with_sample_index(i)))
        .collect()
}
