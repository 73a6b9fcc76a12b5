//! Model-agnostic Shapley estimators that only evaluate the model on
//! composite inputs (`x` on a coalition, a background reference elsewhere).

mod convergence;
mod kernel;
mod sampling;

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

pub use convergence::{convergence_report, BudgetStats, ConvergenceReport, Estimator};
pub use kernel::kernel_shap;
pub use sampling::sampling_shap;

use crate::error::{Error, Result};
use crate::indep::BackgroundSet;
use crate::model::Model;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    /// Total model evaluations the estimator may spend.
    pub n_evaluations: usize,
    /// Sampling only: permutations drawn for every feature before the
    /// variance-driven allocation starts.
    pub min_samples_per_feature: usize,
    /// Kernel only: lasso penalty used to select features before the final
    /// fit. `None` fits all features.
    pub l1_penalty: Option<f64>,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_evaluations: 2048,
            min_samples_per_feature: 10,
            l1_penalty: None,
            seed: 0,
        }
    }
}

/// Wraps a model and counts evaluations.
pub struct CountingModel<'a> {
    inner: &'a dyn Model,
    count: AtomicUsize,
}

impl<'a> CountingModel<'a> {
    pub fn new(inner: &'a dyn Model) -> Self {
        Self {
            inner,
            count: AtomicUsize::new(0),
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::Relaxed)
    }
}

impl Model for CountingModel<'_> {
    fn num_features(&self) -> usize {
        self.inner.num_features()
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.count.fetch_add(1, Ordering::Relaxed);
        self.inner.evaluate(x)
    }
}

fn check_inputs(model: &dyn Model, x: &[f64], bg: &BackgroundSet) -> Result<()> {
    let m = model.num_features();
    if x.len() != m {
        return Err(Error::Dimension { expected: m, got: x.len() });
    }
    if bg.num_features() != m {
        return Err(Error::Dimension {
            expected: m,
            got: bg.num_features(),
        });
    }
    Ok(())
}

/// Draws reference indices with the background weights.
struct ReferenceSampler {
    weighted: Option<WeightedIndex<f64>>,
    len: usize,
}

impl ReferenceSampler {
    fn new(bg: &BackgroundSet) -> Self {
        let uniform = (0..bg.len()).all(|i| bg.weight(i) == bg.weight(0));
        let weighted = (!uniform).then(|| {
            WeightedIndex::new((0..bg.len()).map(|i| bg.weight(i))).expect("weights were validated")
        });
        Self { weighted, len: bg.len() }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        match &self.weighted {
            Some(w) => w.sample(rng),
            None if self.len == 1 => 0,
            None => rng.random_range(0..self.len),
        }
    }
}

fn same_value(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

/// Weighted mean model output over the background.
fn background_mean(model: &dyn Model, bg: &BackgroundSet) -> f64 {
    bg.rows()
        .iter()
        .enumerate()
        .map(|(i, r)| bg.weight(i) * model.evaluate(r))
        .sum()
}
