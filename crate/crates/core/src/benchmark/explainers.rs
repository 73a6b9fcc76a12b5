use std::hash::{DefaultHasher, Hash, Hasher};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::agnostic::{kernel_shap, sampling_shap, EstimatorConfig};
use crate::analysis::{gain_importance, permutation_importance, ScoreMetric};
use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::indep::{independent_tree_shap, BackgroundSet};
use crate::model::{Dataset, Objective, TreeEnsemble};
use crate::oracle::{saabas, shapley_exact};
use crate::treeshap::tree_shap;

/// A local explanation method bound to one model.
pub trait Explainer: Sync {
    fn method(&self) -> Method;
    fn explain(&self, x: &[f64]) -> Result<Explanation>;
}

/// Knobs shared by the benchmark's explainer roster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplainerSettings {
    /// Training rows used as the background for the independent method.
    pub background_size: usize,
    /// Model evaluations per explanation for the sampling estimators.
    pub budget: usize,
    pub min_samples_per_feature: usize,
    pub seed: u64,
}

impl Default for ExplainerSettings {
    fn default() -> Self {
        Self {
            background_size: 200,
            budget: 2048,
            min_samples_per_feature: 10,
            seed: 0,
        }
    }
}

struct TreeShapExplainer<'a>(&'a TreeEnsemble);
struct BruteExplainer<'a>(&'a TreeEnsemble);
struct SaabasExplainer<'a>(&'a TreeEnsemble);

struct IndependentExplainer<'a> {
    model: &'a TreeEnsemble,
    background: BackgroundSet,
}

struct AgnosticExplainer<'a> {
    model: &'a TreeEnsemble,
    reference: BackgroundSet,
    config: EstimatorConfig,
    kernel: bool,
}

/// A global importance vector returned for every sample.
struct GlobalExplainer {
    method: Method,
    base: f64,
    values: Vec<f64>,
}

struct RandomExplainer {
    base: f64,
    num_features: usize,
    seed: u64,
}

impl Explainer for TreeShapExplainer<'_> {
    fn method(&self) -> Method {
        Method::TreeShap
    }
    fn explain(&self, x: &[f64]) -> Result<Explanation> {
        tree_shap(self.0, x)
    }
}

impl Explainer for BruteExplainer<'_> {
    fn method(&self) -> Method {
        Method::Brute
    }
    fn explain(&self, x: &[f64]) -> Result<Explanation> {
        shapley_exact(self.0, x)
    }
}

impl Explainer for SaabasExplainer<'_> {
    fn method(&self) -> Method {
        Method::Saabas
    }
    fn explain(&self, x: &[f64]) -> Result<Explanation> {
        saabas(self.0, x)
    }
}

impl Explainer for IndependentExplainer<'_> {
    fn method(&self) -> Method {
        Method::Independent
    }
    fn explain(&self, x: &[f64]) -> Result<Explanation> {
        independent_tree_shap(self.model, x, &self.background)
    }
}

/// Per-row seed so estimates do not depend on evaluation order.
fn row_seed(seed: u64, x: &[f64]) -> u64 {
    let mut h = DefaultHasher::new();
    seed.hash(&mut h);
    for v in x {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}

impl Explainer for AgnosticExplainer<'_> {
    fn method(&self) -> Method {
        if self.kernel {
            Method::Kernel
        } else {
            Method::Sampling
        }
    }
    fn explain(&self, x: &[f64]) -> Result<Explanation> {
        let cfg = EstimatorConfig {
            seed: row_seed(self.config.seed, x),
            ..self.config
        };
        if self.kernel {
            kernel_shap(self.model, x, &self.reference, &cfg)
        } else {
            sampling_shap(self.model, x, &self.reference, &cfg)
        }
    }
}

impl Explainer for GlobalExplainer {
    fn method(&self) -> Method {
        self.method
    }
    fn explain(&self, _x: &[f64]) -> Result<Explanation> {
        Ok(Explanation::new(self.base, self.values.clone(), self.method))
    }
}

impl Explainer for RandomExplainer {
    fn method(&self) -> Method {
        Method::Random
    }
    fn explain(&self, x: &[f64]) -> Result<Explanation> {
        let mut rng = ChaCha8Rng::seed_from_u64(row_seed(self.seed, x));
        let values = (0..self.num_features).map(|_| StandardNormal.sample(&mut rng)).collect();
        Ok(Explanation::new(self.base, values, Method::Random))
    }
}

/// Column means of `data`, ignoring missing values.
pub(crate) fn column_means(data: &Dataset) -> Vec<f64> {
    (0..data.num_columns())
        .map(|j| {
            let col: Vec<f64> = data.rows().iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
            if col.is_empty() {
                0.0
            } else {
                col.iter().sum::<f64>() / col.len() as f64
            }
        })
        .collect()
}

/// Binds `method` to `model`. The sampling estimators use the training
/// mean as their single reference; the independent method uses the first
/// `background_size` training rows. Global methods need labelled training
/// data (permutation) or recorded gains (gain).
pub fn build_explainer<'a>(
    method: Method,
    model: &'a TreeEnsemble,
    train: &Dataset,
    settings: &ExplainerSettings,
) -> Result<Box<dyn Explainer + 'a>> {
    let base = model.expected_value();
    Ok(match method {
        Method::TreeShap => Box::new(TreeShapExplainer(model)),
        Method::Brute => Box::new(BruteExplainer(model)),
        Method::Saabas => Box::new(SaabasExplainer(model)),
        Method::Independent => {
            let rows = train.rows().iter().take(settings.background_size.max(1)).cloned().collect();
            Box::new(IndependentExplainer {
                model,
                background: BackgroundSet::new(rows)?,
            })
        }
        Method::Sampling | Method::Kernel => Box::new(AgnosticExplainer {
            model,
            reference: BackgroundSet::new(vec![column_means(train)])?,
            config: EstimatorConfig {
                n_evaluations: settings.budget,
                min_samples_per_feature: settings.min_samples_per_feature,
                l1_penalty: None,
                seed: settings.seed,
            },
            kernel: method == Method::Kernel,
        }),
        Method::Gain => Box::new(GlobalExplainer {
            method,
            base,
            values: gain_importance(model)?,
        }),
        Method::Permutation => {
            if train.labels().is_none() {
                return Err(Error::Data("permutation baseline needs labelled training data".into()));
            }
            let metric = match model.objective() {
                Objective::Logistic => ScoreMetric::RocAuc,
                Objective::Raw => ScoreMetric::R2,
            };
            Box::new(GlobalExplainer {
                method,
                base,
                values: permutation_importance(model, train, metric, settings.seed)?,
            })
        }
        Method::Random => Box::new(RandomExplainer {
            base,
            num_features: model.num_features(),
            seed: settings.seed,
        }),
    })
}
