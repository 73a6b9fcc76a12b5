use serde::Serialize;

use crate::agnostic::{kernel_shap, sampling_shap, EstimatorConfig};
use crate::error::Result;
use crate::explanation::{Explanation, Method};
use crate::indep::{independent_tree_shap, BackgroundSet};
use crate::model::fixtures::{scenario_model, ScenarioKind};
use crate::oracle::{interventional_exact, saabas, shapley_exact};
use crate::treeshap::tree_shap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserStudyConfig {
    /// Model evaluations for the sampling estimator.
    pub sampling_budget: usize,
    /// Disagreement the sampling estimator may show and still agree.
    pub sampling_tolerance: f64,
    pub seed: u64,
}

impl Default for UserStudyConfig {
    fn default() -> Self {
        Self {
            sampling_budget: 400_000,
            sampling_tolerance: 0.05,
            seed: 0,
        }
    }
}

/// Disagreement of one method with the consensus on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioScore {
    /// Model kind and sample, e.g. `AND/TTT` (fever, cough, headache).
    pub scenario: String,
    pub method: Method,
    pub consensus: Vec<f64>,
    pub attribution: Vec<f64>,
    /// Sum of absolute differences from the consensus.
    pub disagreement: f64,
    pub agrees: bool,
}

/// Exact methods may differ from the consensus by rounding and by the
/// vanishing symptom rate of the healthy population.
const EXACT_TOLERANCE: f64 = 1e-9;

const SAMPLES: [[bool; 3]; 3] = [[false, false, true], [false, true, true], [true, true, true]];

/// Scores the six tree-applicable methods on the 12 sickness-score
/// scenarios (four model kinds by three symptom patterns). The consensus
/// is the exact Shapley value against the healthy all-false reference.
pub fn user_study_suite(config: &UserStudyConfig) -> Result<Vec<ScenarioScore>> {
    let healthy = vec![0.0; 3];
    let background = BackgroundSet::new(vec![healthy.clone()])?;
    let mut out = Vec::new();
    for kind in ScenarioKind::ALL {
        let model = scenario_model(kind);
        for sample in SAMPLES {
            let x: Vec<f64> = sample.iter().map(|&b| b as u8 as f64).collect();
            let label: String = sample.iter().map(|&b| if b { 'T' } else { 'F' }).collect();
            let consensus = interventional_exact(&model, &x, &healthy)?.values;
            let kernel_cfg = EstimatorConfig {
                n_evaluations: 256,
                seed: config.seed,
                ..EstimatorConfig::default()
            };
            let sampling_cfg = EstimatorConfig {
                n_evaluations: config.sampling_budget,
                seed: config.seed,
                ..EstimatorConfig::default()
            };
            let runs: [(Method, Explanation, f64); 6] = [
                (Method::TreeShap, tree_shap(&model, &x)?, EXACT_TOLERANCE),
                (Method::Brute, shapley_exact(&model, &x)?, EXACT_TOLERANCE),
                (Method::Independent, independent_tree_shap(&model, &x, &background)?, EXACT_TOLERANCE),
                (Method::Kernel, kernel_shap(&model, &x, &background, &kernel_cfg)?, EXACT_TOLERANCE),
                (
                    Method::Sampling,
                    sampling_shap(&model, &x, &background, &sampling_cfg)?,
                    config.sampling_tolerance,
                ),
                (Method::Saabas, saabas(&model, &x)?, EXACT_TOLERANCE),
            ];
            for (method, e, tol) in runs {
                let disagreement: f64 = e.values.iter().zip(&consensus).map(|(a, b)| (a - b).abs()).sum();
                out.push(ScenarioScore {
                    scenario: format!("{}/{label}", kind.name()),
                    method,
                    consensus: consensus.clone(),
                    attribution: e.values,
                    disagreement,
                    agrees: disagreement <= tol,
                });
            }
        }
    }
    Ok(out)
}
