use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::explainers::Explainer;
use super::masking::{mask_row, MaskStats};
use super::{Direction, MetricFamily, MetricResult, MetricSpec, Mode};
use crate::error::{Error, Result};
use crate::explanation::{Explanation, FeatureSubset, Method};
use crate::model::{Dataset, Objective, TreeEnsemble};
use crate::stats::{r2, roc_auc, trapezoid};

/// Features eligible for keeping or removing, best first.
fn ranking(phi: &[f64], direction: Direction) -> Vec<usize> {
    let mut idx: Vec<usize> = match direction {
        Direction::Positive => (0..phi.len()).filter(|&i| phi[i] > 0.0).collect(),
        Direction::Negative => (0..phi.len()).filter(|&i| phi[i] < 0.0).collect(),
        Direction::Absolute => (0..phi.len()).collect(),
    };
    let key = |i: usize| match direction {
        Direction::Positive => phi[i],
        Direction::Negative => -phi[i],
        Direction::Absolute => phi[i].abs(),
    };
    idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));
    idx
}

/// Mean model output over the masked versions of `x` at every fraction.
#[allow(clippy::too_many_arguments)]
fn masked_outputs(
    model: &TreeEnsemble,
    x: &[f64],
    phi: &[f64],
    mode: Mode,
    direction: Direction,
    spec: &MetricSpec,
    masker: super::Masker,
    stats: &MaskStats,
    seed: u64,
) -> Vec<f64> {
    let m = x.len();
    let order = ranking(phi, direction);
    spec.fractions
        .iter()
        .enumerate()
        .map(|(step, &f)| {
            // One stream per (sample, fraction): every explainer sees the
            // same resampled donors.
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(step as u64);
            let k = ((f * m as f64).round() as usize).min(order.len());
            let chosen = &order[..k];
            let hidden = match mode {
                Mode::Keep => {
                    let mut h = FeatureSubset::full(m);
                    chosen.iter().for_each(|&i| h.remove(i));
                    h
                }
                Mode::Remove => {
                    let mut h = FeatureSubset::empty(m);
                    chosen.iter().for_each(|&i| h.insert(i));
                    h
                }
            };
            let rows = mask_row(x, &hidden, masker, stats, &mut rng);
            rows.iter().map(|r| model.margin(r)).sum::<f64>() / rows.len() as f64
        })
        .collect()
}

/// Ordering metric from precomputed explanations of the evaluation rows.
///
/// Positive and negative directions average the masked model output over
/// samples; the absolute direction scores the masked outputs' accuracy
/// (ROC AUC for logistic models, R² otherwise). The score is the area under
/// the resulting curve.
pub(crate) fn ordering_from_explanations(
    spec: &MetricSpec,
    model: &TreeEnsemble,
    explanations: &[Explanation],
    eval: &Dataset,
    stats: &MaskStats,
    seed: u64,
) -> Result<MetricResult> {
    let MetricFamily::Ordering { mode, direction, masker } = spec.family else {
        return Err(Error::InvalidInput(format!("{} is not an ordering metric", spec.name())));
    };
    let n = explanations.len();
    if n == 0 || eval.num_rows() < n {
        return Err(Error::Data("ordering metrics need a non-empty evaluation set".into()));
    }
    let stats = &stats.clone().with_resample_count(spec.resample_count);
    let outputs: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|s| {
            masked_outputs(
                model,
                &eval.rows()[s],
                &explanations[s].values,
                mode,
                direction,
                spec,
                masker,
                stats,
                seed.wrapping_add(s as u64),
            )
        })
        .collect();
    let curve: Vec<(f64, f64)> = match direction {
        Direction::Positive | Direction::Negative => spec
            .fractions
            .iter()
            .enumerate()
            .map(|(k, &f)| (f, outputs.iter().map(|o| o[k]).sum::<f64>() / n as f64))
            .collect(),
        Direction::Absolute => {
            let labels = eval
                .labels()
                .ok_or_else(|| Error::Data("absolute ordering metrics need labels".into()))?;
            let labels = &labels[..n];
            spec.fractions
                .iter()
                .enumerate()
                .map(|(k, &f)| {
                    let pred: Vec<f64> = outputs.iter().map(|o| o[k]).collect();
                    let acc = match model.objective() {
                        Objective::Logistic => roc_auc(&pred, labels)?,
                        Objective::Raw => r2(&pred, labels)?,
                    };
                    Ok((f, acc))
                })
                .collect::<Result<_>>()?
        }
    };
    Ok(MetricResult {
        explainer: explanations[0].method.to_string(),
        model: String::new(),
        metric: spec.name(),
        score: trapezoid(&curve),
        curve: Some(curve),
    })
}

/// Runs `explainer` on the evaluation rows and scores one ordering metric.
pub fn ordering_metric(
    spec: &MetricSpec,
    model: &TreeEnsemble,
    explainer: &dyn Explainer,
    eval: &Dataset,
    stats: &MaskStats,
    seed: u64,
) -> Result<MetricResult> {
    let explanations: Vec<Explanation> = eval.rows().par_iter().map(|x| explainer.explain(x)).collect::<Result<_>>()?;
    ordering_from_explanations(spec, model, &explanations, eval, stats, seed)
}

/// Maps a normalized local-accuracy deviation to a score.
pub fn accuracy_ladder(sigma: f64) -> f64 {
    const LADDER: [(f64, f64); 8] = [
        (1e-6, 1.0),
        (0.01, 0.9),
        (0.05, 0.75),
        (0.10, 0.6),
        (0.20, 0.4),
        (0.30, 0.3),
        (0.50, 0.2),
        (0.70, 0.1),
    ];
    LADDER.iter().find(|(cut, _)| sigma < *cut).map_or(0.0, |&(_, s)| s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocalAccuracy {
    pub sigma: f64,
    pub score: f64,
}

/// Normalized RMS gap between the model output and `base + sum(phi)`.
pub(crate) fn local_accuracy_from(explanations: &[Explanation], outputs: &[f64]) -> Result<LocalAccuracy> {
    if explanations.is_empty() || explanations.len() != outputs.len() {
        return Err(Error::Data("local accuracy needs one explanation per output".into()));
    }
    let n = outputs.len() as f64;
    let num = (explanations.iter().zip(outputs).map(|(e, f)| (f - e.total()).powi(2)).sum::<f64>() / n).sqrt();
    let den = (outputs.iter().map(|f| f * f).sum::<f64>() / n).sqrt();
    let sigma = if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            return Err(Error::Domain("model output is identically zero; local accuracy is undefined".into()));
        }
    } else {
        num / den
    };
    Ok(LocalAccuracy {
        sigma,
        score: accuracy_ladder(sigma),
    })
}

pub fn local_accuracy_score(explainer: &dyn Explainer, model: &TreeEnsemble, eval: &[Vec<f64>]) -> Result<LocalAccuracy> {
    let explanations: Vec<Explanation> = eval.par_iter().map(|x| explainer.explain(x)).collect::<Result<_>>()?;
    let outputs: Vec<f64> = eval.iter().map(|x| model.margin(x)).collect();
    local_accuracy_from(&explanations, &outputs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Runtime {
    pub init_seconds: f64,
    /// Time to explain the measured samples, one at a time.
    pub explain_seconds: f64,
    pub samples: usize,
    /// Initialization plus the per-prediction time scaled to 1,000
    /// predictions.
    pub seconds_per_1000: f64,
}

/// Times explainer construction and sequential explanation of up to 100
/// rows.
pub fn runtime_metric<'a, F>(build: F, eval: &[Vec<f64>]) -> Result<Runtime>
where
    F: FnOnce() -> Result<Box<dyn Explainer + 'a>>,
{
    let samples = eval.len().min(100);
    if samples == 0 {
        return Err(Error::Data("runtime needs at least one sample".into()));
    }
    let start = Instant::now();
    let explainer = build()?;
    let init_seconds = start.elapsed().as_secs_f64();
    let start = Instant::now();
    for x in &eval[..samples] {
        std::hint::black_box(explainer.explain(x)?);
    }
    let explain_seconds = start.elapsed().as_secs_f64();
    Ok(Runtime {
        init_seconds,
        explain_seconds,
        samples,
        seconds_per_1000: init_seconds + explain_seconds * 1000.0 / samples as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyRating {
    ExactGuarantee,
    GuaranteeInSamplingLimit,
    None,
}

impl ConsistencyRating {
    pub fn score(self) -> f64 {
        match self {
            Self::ExactGuarantee => 1.0,
            Self::GuaranteeInSamplingLimit => 0.5,
            Self::None => 0.0,
        }
    }
}

/// Theoretical consistency guarantee of each method.
pub fn consistency_rating(method: &str) -> Result<ConsistencyRating> {
    let m: Method = method.parse()?;
    Ok(match m {
        Method::TreeShap | Method::Independent | Method::Brute => ConsistencyRating::ExactGuarantee,
        Method::Sampling | Method::Kernel => ConsistencyRating::GuaranteeInSamplingLimit,
        Method::Saabas | Method::Gain | Method::Permutation | Method::Random => ConsistencyRating::None,
    })
}
