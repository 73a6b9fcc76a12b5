use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::{gain_importance, permutation_importance, ScoreMetric};
use crate::error::{Error, Result};
use crate::indep::{explain_loss_batch, BackgroundSet, LossKind};
use crate::model::{fit_boosted_trees, BoostConfig, Dataset, Objective, TreeEnsemble};
use crate::stats::{mean, paired_t_test, TTest};
use crate::treeshap::tree_shap;

/// How the informative features within a group of three combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum InteractionKind {
    Product,
    Min,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingMethod {
    MeanAbsShap,
    /// Mean attribution of the squared-error loss, most negative first.
    LossShap,
    Gain,
    Permutation,
}

impl RankingMethod {
    pub const ALL: [RankingMethod; 4] = [Self::MeanAbsShap, Self::LossShap, Self::Gain, Self::Permutation];

    pub fn name(self) -> &'static str {
        match self {
            Self::MeanAbsShap => "mean_abs_shap",
            Self::LossShap => "loss_shap",
            Self::Gain => "gain",
            Self::Permutation => "permutation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureSelectionConfig {
    pub n_features: usize,
    pub n_true: usize,
    pub interaction_kind: InteractionKind,
    /// Boosting rounds: one tree uses learning rate 1.0, more use 0.3.
    pub trees: usize,
    pub n_datasets: usize,
    pub rows: usize,
    /// Training rows explained for the SHAP-based rankings.
    pub explained: usize,
    /// Background rows for the loss attributions.
    pub references: usize,
    pub seed: u64,
}

impl Default for FeatureSelectionConfig {
    fn default() -> Self {
        Self {
            n_features: 200,
            n_true: 3,
            interaction_kind: InteractionKind::Min,
            trees: 1,
            n_datasets: 100,
            rows: 200,
            explained: 200,
            references: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureSelectionReport {
    pub config_trees: usize,
    /// Per ranking method, the fraction of true features found in the top
    /// `n_true` on each dataset.
    pub recovery: Vec<(RankingMethod, Vec<f64>)>,
}

impl FeatureSelectionReport {
    pub fn recovery_of(&self, method: RankingMethod) -> &[f64] {
        &self.recovery.iter().find(|(m, _)| *m == method).expect("every method is scored").1
    }

    pub fn mean_recovery(&self, method: RankingMethod) -> f64 {
        mean(self.recovery_of(method))
    }

    /// Paired t-test of `a` against `b` across datasets.
    pub fn compare(&self, a: RankingMethod, b: RankingMethod) -> Result<TTest> {
        paired_t_test(self.recovery_of(a), self.recovery_of(b))
    }
}

/// Uniform features; the label sums one term per group of three true
/// features (a single true feature enters linearly).
fn simulate(config: &FeatureSelectionConfig, rng: &mut ChaCha8Rng) -> Result<(Dataset, Vec<usize>)> {
    let truth: Vec<usize> = sample(rng, config.n_features, config.n_true).into_vec();
    let rows: Vec<Vec<f64>> = (0..config.rows)
        .map(|_| (0..config.n_features).map(|_| rng.random::<f64>()).collect())
        .collect();
    let labels = rows
        .iter()
        .map(|r| {
            truth
                .chunks(3)
                .map(|g| {
                    let v = g.iter().map(|&j| r[j]);
                    match config.interaction_kind {
                        InteractionKind::Product => v.product::<f64>(),
                        InteractionKind::Min => v.fold(f64::INFINITY, f64::min),
                    }
                })
                .sum()
        })
        .collect();
    Ok((Dataset::from_rows(rows)?.with_labels(labels)?, truth))
}

fn scores(method: RankingMethod, model: &TreeEnsemble, data: &Dataset, config: &FeatureSelectionConfig, seed: u64) -> Result<Vec<f64>> {
    let m = config.n_features;
    let explained = &data.rows()[..config.explained.min(data.num_rows())];
    match method {
        RankingMethod::MeanAbsShap => {
            let mut total = vec![0.0; m];
            for x in explained {
                for (t, v) in total.iter_mut().zip(tree_shap(model, x)?.values) {
                    *t += v.abs();
                }
            }
            Ok(total)
        }
        RankingMethod::LossShap => {
            let labels = &data.labels().expect("simulated labels")[..explained.len()];
            let bg = BackgroundSet::new(data.rows()[..config.references.min(data.num_rows())].to_vec())?;
            let phi = explain_loss_batch(model, explained, labels, LossKind::SquaredError, &bg)?;
            let mut total = vec![0.0; m];
            for e in phi {
                for (t, v) in total.iter_mut().zip(e.values) {
                    // Negative loss attributions mean the feature helps.
                    *t -= v;
                }
            }
            Ok(total)
        }
        RankingMethod::Gain => gain_importance(model),
        RankingMethod::Permutation => permutation_importance(model, data, ScoreMetric::R2, seed),
    }
}

fn recovery(scores: &[f64], truth: &[usize]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let hits = order[..truth.len()].iter().filter(|i| truth.contains(i)).count();
    hits as f64 / truth.len() as f64
}

/// Simulates `n_datasets` tasks, fits boosted trees to each and reports how
/// often each ranking method puts the true features on top.
pub fn feature_selection_power(config: &FeatureSelectionConfig) -> Result<FeatureSelectionReport> {
    if config.n_true == 0 || config.n_true > config.n_features || config.n_datasets == 0 || config.trees == 0 {
        return Err(Error::InvalidInput(
            "need 1 <= n_true <= n_features, at least one dataset and at least one tree".into(),
        ));
    }
    if config.rows < 2 {
        return Err(Error::InvalidInput("need at least two rows per dataset".into()));
    }
    let boost = BoostConfig {
        rounds: config.trees,
        depth: 6,
        learning_rate: if config.trees == 1 { 1.0 } else { 0.3 },
        objective: Objective::Raw,
        ..BoostConfig::default()
    };
    let per_dataset: Vec<Vec<f64>> = (0..config.n_datasets)
        .into_par_iter()
        .map(|d| {
            let seed = config.seed.wrapping_add(d as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (data, truth) = simulate(config, &mut rng)?;
            let model = fit_boosted_trees(&data, &BoostConfig { seed, ..boost })?;
            RankingMethod::ALL
                .iter()
                .map(|&method| Ok(recovery(&scores(method, &model, &data, config, seed)?, &truth)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(FeatureSelectionReport {
        config_trees: config.trees,
        recovery: RankingMethod::ALL
            .iter()
            .enumerate()
            .map(|(k, &m)| (m, per_dataset.iter().map(|r| r[k]).collect()))
            .collect(),
    })
}
