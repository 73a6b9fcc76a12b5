//! Benchmark harness for local explanation methods: ordering metrics under
//! three maskers, local accuracy, runtime and consistency, plus the
//! user-study scenarios and the feature-selection experiment.

mod explainers;
mod masking;
mod metrics;
mod selection;
mod suite;
mod user_study;

use std::fmt;

use serde::Serialize;

pub use explainers::{build_explainer, Explainer, ExplainerSettings};
pub use masking::{mask_row, MaskStats};
pub use metrics::{
    accuracy_ladder, consistency_rating, local_accuracy_score, ordering_metric, runtime_metric, ConsistencyRating,
    LocalAccuracy, Runtime,
};
pub use selection::{feature_selection_power, FeatureSelectionConfig, FeatureSelectionReport, InteractionKind, RankingMethod};
pub use suite::{run_benchmark, synthetic_suite, BenchReport, BenchmarkConfig, SuiteData, SyntheticSuite, Tile};
pub use user_study::{user_study_suite, ScenarioScore, UserStudyConfig};

/// Evenly spaced fractions of features kept or removed.
pub const FRACTIONS: usize = 11;
/// Training rows averaged over by the resample masker.
pub const RESAMPLE_COUNT: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Keep,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Positive,
    Negative,
    Absolute,
}

/// How hidden features are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Masker {
    /// Training column mean.
    Mean,
    /// Values from random training rows, averaged over the model outputs.
    Resample,
    /// Conditional mean under a multivariate normal fit to the training data.
    Impute,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricFamily {
    Ordering { mode: Mode, direction: Direction, masker: Masker },
    LocalAccuracy,
    Runtime,
    Consistency,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSpec {
    pub family: MetricFamily,
    pub fractions: Vec<f64>,
    pub resample_count: usize,
}

impl MetricSpec {
    pub fn new(family: MetricFamily) -> Self {
        Self {
            family,
            fractions: (0..FRACTIONS).map(|i| i as f64 / (FRACTIONS - 1) as f64).collect(),
            resample_count: RESAMPLE_COUNT,
        }
    }

    pub fn ordering(mode: Mode, direction: Direction, masker: Masker) -> Self {
        Self::new(MetricFamily::Ordering { mode, direction, masker })
    }

    /// The 21 metrics: runtime, local accuracy, consistency, then the 18
    /// ordering metrics.
    pub fn all() -> Vec<MetricSpec> {
        let mut out = vec![
            Self::new(MetricFamily::Runtime),
            Self::new(MetricFamily::LocalAccuracy),
            Self::new(MetricFamily::Consistency),
        ];
        for mode in [Mode::Keep, Mode::Remove] {
            for direction in [Direction::Positive, Direction::Negative, Direction::Absolute] {
                for masker in [Masker::Mean, Masker::Resample, Masker::Impute] {
                    out.push(Self::ordering(mode, direction, masker));
                }
            }
        }
        out
    }

    pub fn name(&self) -> String {
        match self.family {
            MetricFamily::Runtime => "runtime".into(),
            MetricFamily::LocalAccuracy => "local_accuracy".into(),
            MetricFamily::Consistency => "consistency".into(),
            MetricFamily::Ordering { mode, direction, masker } => {
                let mode = match mode {
                    Mode::Keep => "keep",
                    Mode::Remove => "remove",
                };
                let direction = match direction {
                    Direction::Positive => "positive",
                    Direction::Negative => "negative",
                    Direction::Absolute => "absolute",
                };
                let masker = match masker {
                    Masker::Mean => "mask",
                    Masker::Resample => "resample",
                    Masker::Impute => "impute",
                };
                format!("{mode}_{direction}_{masker}")
            }
        }
    }

    /// Whether smaller scores are better.
    pub fn lower_is_better(&self) -> bool {
        match self.family {
            MetricFamily::Runtime => true,
            MetricFamily::Ordering { mode, direction, .. } => matches!(
                (mode, direction),
                (Mode::Keep, Direction::Negative) | (Mode::Remove, Direction::Positive) | (Mode::Remove, Direction::Absolute)
            ),
            _ => false,
        }
    }
}

impl fmt::Display for MetricSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// One (explainer, metric) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricResult {
    pub explainer: String,
    pub model: String,
    pub metric: String,
    pub score: f64,
    /// `(fraction, value)` points for ordering metrics.
    pub curve: Option<Vec<(f64, f64)>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn twenty_one_distinct_metrics() {
        let all = MetricSpec::all();
        assert_eq!(all.len(), 21);
        let names: HashSet<String> = all.iter().map(|m| m.name()).collect();
        assert_eq!(names.len(), 21);
        assert!(names.contains("keep_absolute_impute"));
        assert_eq!(all[5].fractions.len(), 11);
        assert_eq!(all[5].fractions[10], 1.0);
    }

    #[test]
    fn direction_flags() {
        let lower: Vec<String> = MetricSpec::all().into_iter().filter(|m| m.lower_is_better()).map(|m| m.name()).collect();
        assert_eq!(lower.len(), 1 + 3 * 3);
        assert!(lower.contains(&"runtime".to_string()));
        assert!(lower.contains(&"keep_negative_resample".to_string()));
        assert!(lower.contains(&"remove_absolute_mask".to_string()));
    }
}
