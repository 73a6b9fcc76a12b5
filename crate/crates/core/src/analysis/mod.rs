//! Global views assembled from many local explanations.

mod cluster;
mod dependence;
mod importance;
mod monitor;
mod pca;

pub use cluster::{supervised_cluster, Clustering, Merge};
pub use dependence::{dependence_data, interaction_dependence_split, summary_data, Dependence, FeatureDots, InteractionSplit};
pub use importance::{gain_importance, permutation_importance, ScoreMetric};
pub use monitor::{drift_test, monitoring_series, MonitoringSeries};
pub use pca::{explanation_pca, Pca};

use crate::error::{Error, Result};
use crate::explanation::Explanation;

/// Attributions for `N` samples over `M` features, aligned with the
/// feature values they explain.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationMatrix {
    feature_names: Vec<String>,
    values: Vec<Vec<f64>>,
    base: Vec<f64>,
    features: Vec<Vec<f64>>,
}

impl ExplanationMatrix {
    pub fn new(feature_names: Vec<String>, values: Vec<Vec<f64>>, base: Vec<f64>, features: Vec<Vec<f64>>) -> Result<Self> {
        let m = feature_names.len();
        if values.len() != base.len() || values.len() != features.len() {
            return Err(Error::InvalidInput(format!(
                "{} attribution rows, {} base values and {} feature rows",
                values.len(),
                base.len(),
                features.len()
            )));
        }
        for row in values.iter().chain(&features) {
            if row.len() != m {
                return Err(Error::Dimension { expected: m, got: row.len() });
            }
        }
        Ok(Self {
            feature_names,
            values,
            base,
            features,
        })
    }

    /// Builds the matrix from per-row explanations of `rows`.
    pub fn from_explanations(feature_names: Vec<String>, explanations: &[Explanation], rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            feature_names,
            explanations.iter().map(|e| e.values.clone()).collect(),
            explanations.iter().map(|e| e.base).collect(),
            rows.to_vec(),
        )
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn num_samples(&self) -> usize {
        self.values.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    fn check_feature(&self, i: usize) -> Result<()> {
        if i >= self.num_features() {
            return Err(Error::InvalidInput(format!(
                "feature {i} out of range for {} features",
                self.num_features()
            )));
        }
        Ok(())
    }
}

/// Mean absolute attribution per feature as `(feature, importance)`,
/// most important first; ties keep feature order.
pub fn global_importance(e: &ExplanationMatrix) -> Result<Vec<(usize, f64)>> {
    if e.num_samples() == 0 {
        return Err(Error::InvalidInput("no samples to summarize".into()));
    }
    let n = e.num_samples() as f64;
    let mut imp: Vec<(usize, f64)> = (0..e.num_features())
        .map(|i| (i, e.values.iter().map(|r| r[i].abs()).sum::<f64>() / n))
        .collect();
    imp.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(imp)
}
