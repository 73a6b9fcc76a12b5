use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Dataset, Model, TreeEnsemble};
use crate::stats::{r2, roc_auc};

/// Total split gain per feature.
pub fn gain_importance(ensemble: &TreeEnsemble) -> Result<Vec<f64>> {
    let mut out = vec![0.0; ensemble.num_features()];
    for (t, tree) in ensemble.trees().iter().enumerate() {
        let gain = tree
            .gain()
            .ok_or_else(|| Error::Unsupported(format!("tree {t} carries no split gains")))?;
        for node in 0..tree.len() {
            if !tree.is_leaf(node) {
                out[tree.feature(node)] += gain[node];
            }
        }
    }
    Ok(out)
}

/// Accuracy measure for permutation importance; higher is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMetric {
    /// ROC AUC of the model output against 0/1 labels.
    RocAuc,
    R2,
}

impl ScoreMetric {
    pub fn score(self, pred: &[f64], labels: &[f64]) -> Result<f64> {
        match self {
            ScoreMetric::RocAuc => roc_auc(pred, labels),
            ScoreMetric::R2 => r2(pred, labels),
        }
    }
}

const PERMUTATION_REPEATS: usize = 10;

/// Drop in `metric` when each column is shuffled, averaged over ten
/// seeded shuffles.
pub fn permutation_importance(model: &dyn Model, data: &Dataset, metric: ScoreMetric, seed: u64) -> Result<Vec<f64>> {
    let labels = data
        .labels()
        .ok_or_else(|| Error::Data("permutation importance needs labels".into()))?;
    let m = model.num_features();
    if data.num_columns() != m {
        return Err(Error::Dimension {
            expected: m,
            got: data.num_columns(),
        });
    }
    let rows = data.rows();
    let pred: Vec<f64> = rows.iter().map(|r| model.evaluate(r)).collect();
    let baseline = metric.score(&pred, labels)?;
    (0..m)
        .into_par_iter()
        .map(|f| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (f as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut column: Vec<f64> = rows.iter().map(|r| r[f]).collect();
            let mut row = vec![0.0; m];
            let mut pred = vec![0.0; rows.len()];
            let mut drop = 0.0;
            for _ in 0..PERMUTATION_REPEATS {
                column.shuffle(&mut rng);
                for (i, r) in rows.iter().enumerate() {
                    row.copy_from_slice(r);
                    row[f] = column[i];
                    pred[i] = model.evaluate(&row);
                }
                drop += baseline - metric.score(&pred, labels)?;
            }
            Ok(drop / PERMUTATION_REPEATS as f64)
        })
        .collect()
}
