use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use super::{kernel_shap, sampling_shap, CountingModel, EstimatorConfig};
use crate::error::{Error, Result};
use crate::indep::{independent_tree_shap, BackgroundSet};
use crate::model::TreeEnsemble;

/// An explainer whose error is tracked against the exact interventional
/// values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Estimator {
    /// The exact tree algorithm; the budget is ignored.
    Exact,
    Sampling { min_samples_per_feature: usize },
    Kernel { l1_penalty: Option<f64> },
}

impl Estimator {
    pub fn name(&self) -> String {
        match self {
            Estimator::Exact => "exact".into(),
            Estimator::Sampling { min_samples_per_feature } => format!("sampling(min {min_samples_per_feature})"),
            Estimator::Kernel { l1_penalty: None } => "kernel".into(),
            Estimator::Kernel { l1_penalty: Some(l) } => format!("kernel(l1 {l})"),
        }
    }
}

/// Statistics at one budget over all repetitions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BudgetStats {
    pub budget: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// `std / |mean|` per feature (0 where the mean is 0).
    pub normalized_std: Vec<f64>,
    /// Average over repetitions of the largest per-feature absolute error.
    pub max_error: f64,
    /// Average over repetitions of the mean per-feature absolute error.
    pub mean_error: f64,
    /// Model evaluations per repetition, averaged.
    pub evaluations: f64,
    /// Wall-clock seconds per repetition, averaged.
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub estimator: String,
    pub truth: Vec<f64>,
    pub repetitions: usize,
    pub budgets: Vec<BudgetStats>,
}

impl ConvergenceReport {
    /// One CSV row per budget.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "estimator",
            "budget",
            "evaluations",
            "max_error",
            "mean_error",
            "mean_normalized_std",
            "wall_seconds",
        ])?;
        for b in &self.budgets {
            let nstd = b.normalized_std.iter().sum::<f64>() / b.normalized_std.len().max(1) as f64;
            w.write_record([
                self.estimator.clone(),
                b.budget.to_string(),
                b.evaluations.to_string(),
                b.max_error.to_string(),
                b.mean_error.to_string(),
                nstd.to_string(),
                b.wall_seconds.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Runs `estimator` `repetitions` times at each budget and measures its
/// spread and its error against [`independent_tree_shap`] on the same
/// background. Repetition `k` uses seed `seed + k`.
pub fn convergence_report(
    estimator: Estimator,
    model: &TreeEnsemble,
    x: &[f64],
    bg: &BackgroundSet,
    budgets: &[usize],
    repetitions: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    if repetitions < 2 {
        return Err(Error::InvalidInput("convergence needs at least two repetitions".into()));
    }
    if budgets.is_empty() || budgets.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidInput("budgets must be non-empty and ascending".into()));
    }
    let truth = independent_tree_shap(model, x, bg)?.values;
    let m = truth.len();

    let mut rows = Vec::with_capacity(budgets.len());
    for &budget in budgets {
        let runs: Vec<(Vec<f64>, usize, f64)> = (0..repetitions)
            .into_par_iter()
            .map(|k| {
                let counter = CountingModel::new(model);
                let cfg = EstimatorConfig {
                    n_evaluations: budget,
                    seed: seed.wrapping_add(k as u64),
                    ..Default::default()
                };
                let start = Instant::now();
                let values = match estimator {
                    Estimator::Exact => independent_tree_shap(model, x, bg)?.values,
                    Estimator::Sampling { min_samples_per_feature } => {
                        sampling_shap(&counter, x, bg, &EstimatorConfig { min_samples_per_feature, ..cfg })?.values
                    }
                    Estimator::Kernel { l1_penalty } => {
                        kernel_shap(&counter, x, bg, &EstimatorConfig { l1_penalty, ..cfg })?.values
                    }
                };
                Ok((values, counter.count(), start.elapsed().as_secs_f64()))
            })
            .collect::<Result<_>>()?;

        let n = repetitions as f64;
        let mut mean = vec![0.0; m];
        for (v, _, _) in &runs {
            mean.iter_mut().zip(v).for_each(|(a, b)| *a += b / n);
        }
        let std: Vec<f64> = (0..m)
            .map(|i| (runs.iter().map(|(v, _, _)| (v[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
            .collect();
        let normalized_std = std
            .iter()
            .zip(&mean)
            .map(|(s, mu)| if *mu == 0.0 { 0.0 } else { s / mu.abs() })
            .collect();
        let errors: Vec<Vec<f64>> = runs
            .iter()
            .map(|(v, _, _)| v.iter().zip(&truth).map(|(a, b)| (a - b).abs()).collect())
            .collect();
        let max_error = errors.iter().map(|e| e.iter().copied().fold(0.0, f64::max)).sum::<f64>() / n;
        let mean_error = errors.iter().map(|e| e.iter().sum::<f64>() / m.max(1) as f64).sum::<f64>() / n;
        rows.push(BudgetStats {
            budget,
            mean,
            std,
            normalized_std,
            max_error,
            mean_error,
            evaluations: runs.iter().map(|r| r.1 as f64).sum::<f64>() / n,
            wall_seconds: runs.iter().map(|r| r.2).sum::<f64>() / n,
        });
    }
    Ok(ConvergenceReport {
        estimator: estimator.name(),
        truth,
        repetitions,
        budgets: rows,
    })
}
