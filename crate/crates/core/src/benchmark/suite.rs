use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::explainers::{build_explainer, ExplainerSettings};
use super::masking::MaskStats;
use super::metrics::{consistency_rating, local_accuracy_from, ordering_from_explanations, runtime_metric};
use super::{MetricFamily, MetricResult, MetricSpec};
use crate::error::{Error, Result};
use crate::explanation::{Explanation, Method};
use crate::model::{fit_boosted_trees, sigmoid, BoostConfig, Dataset, Objective, TreeEnsemble};

/// One benchmarked model with its training and evaluation data.
#[derive(Debug, Clone)]
pub struct SuiteData {
    pub name: String,
    pub model: TreeEnsemble,
    pub train: Dataset,
    pub eval: Dataset,
}

/// A synthetic classification task: standard normal features (optionally
/// correlated within groups of three) and labels drawn from a logistic
/// model that is linear in the first `informative` features with
/// alternating signs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSuite {
    pub features: usize,
    pub informative: usize,
    /// Correlation between features in the same group of three.
    pub group_correlation: f64,
    pub train_rows: usize,
    pub eval_rows: usize,
    /// Independently generated and trained models.
    pub models: usize,
    pub boost: BoostConfig,
    pub seed: u64,
}

impl Default for SyntheticSuite {
    fn default() -> Self {
        Self {
            features: 60,
            informative: 20,
            group_correlation: 0.0,
            train_rows: 1000,
            eval_rows: 100,
            models: 1,
            boost: BoostConfig {
                rounds: 100,
                depth: 4,
                learning_rate: 0.1,
                objective: Objective::Logistic,
                ..BoostConfig::default()
            },
            seed: 0,
        }
    }
}

fn draw_rows(rng: &mut ChaCha8Rng, n: usize, m: usize, rho: f64) -> Vec<Vec<f64>> {
    let (shared, own) = (rho.sqrt(), (1.0 - rho).sqrt());
    (0..n)
        .map(|_| {
            let mut row = vec![0.0; m];
            let mut group = 0.0;
            for (j, v) in row.iter_mut().enumerate() {
                if j % 3 == 0 {
                    group = StandardNormal.sample(rng);
                }
                let z: f64 = StandardNormal.sample(rng);
                *v = shared * group + own * z;
            }
            row
        })
        .collect()
}

/// Generates and fits the suite's models.
pub fn synthetic_suite(spec: &SyntheticSuite) -> Result<Vec<SuiteData>> {
    if spec.features == 0 || spec.informative > spec.features || !(0.0..1.0).contains(&spec.group_correlation) {
        return Err(Error::InvalidInput(
            "suite needs at least one feature, informative <= features and correlation in [0, 1)".into(),
        ));
    }
    (0..spec.models)
        .map(|k| {
            let seed = spec.seed.wrapping_add(k as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = spec.train_rows + spec.eval_rows;
            let rows = draw_rows(&mut rng, n, spec.features, spec.group_correlation);
            let labels: Vec<f64> = rows
                .iter()
                .map(|r| {
                    let logit: f64 = (0..spec.informative).map(|j| if j % 2 == 0 { r[j] } else { -r[j] }).sum();
                    let y = Bernoulli::new(sigmoid(logit)).expect("probability").sample(&mut rng);
                    y as u8 as f64
                })
                .collect();
            let (train_rows, eval_rows) = rows.split_at(spec.train_rows);
            let (train_labels, eval_labels) = labels.split_at(spec.train_rows);
            let train = Dataset::from_rows(train_rows.to_vec())?.with_labels(train_labels.to_vec())?;
            let eval = Dataset::from_rows(eval_rows.to_vec())?.with_labels(eval_labels.to_vec())?;
            let model = fit_boosted_trees(&train, &BoostConfig { seed, ..spec.boost })?;
            Ok(SuiteData {
                name: format!("boosted_trees_{k}"),
                model,
                train,
                eval,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkConfig {
    pub explainers: Vec<Method>,
    pub metrics: Vec<MetricSpec>,
    /// Evaluation rows explained per model.
    pub eval_size: usize,
    pub settings: ExplainerSettings,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            explainers: vec![
                Method::TreeShap,
                Method::Saabas,
                Method::Independent,
                Method::Sampling,
                Method::Kernel,
                Method::Gain,
                Method::Permutation,
                Method::Random,
            ],
            metrics: MetricSpec::all(),
            eval_size: 100,
            settings: ExplainerSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub results: Vec<MetricResult>,
    /// Metric name to its direction flag.
    pub lower_is_better: BTreeMap<String, bool>,
}

/// Scores every (model, explainer, metric) cell. Runtime cells are timed
/// sequentially; all other cells run in parallel and are deterministic in
/// `config.seed`.
pub fn run_benchmark(suite: &[SuiteData], config: &BenchmarkConfig) -> Result<BenchReport> {
    if suite.is_empty() || config.explainers.is_empty() || config.metrics.is_empty() {
        return Err(Error::InvalidInput("benchmark needs models, explainers and metrics".into()));
    }
    let mut results = Vec::new();
    for data in suite {
        let n = config.eval_size.min(data.eval.num_rows());
        if n == 0 {
            return Err(Error::Data(format!("model {} has no evaluation rows", data.name)));
        }
        let eval = Dataset::from_rows(data.eval.rows()[..n].to_vec())?;
        let eval = match data.eval.labels() {
            Some(l) => eval.with_labels(l[..n].to_vec())?,
            None => eval,
        };
        let stats = MaskStats::from_dataset(&data.train)?;
        let outputs: Vec<f64> = eval.rows().iter().map(|x| data.model.margin(x)).collect();
        let settings = ExplainerSettings {
            seed: config.seed,
            ..config.settings
        };
        for &method in &config.explainers {
            log::info!("benchmarking {method} on {}", data.name);
            let explainer = build_explainer(method, &data.model, &data.train, &settings)?;
            let explanations: Vec<Explanation> =
                eval.rows().par_iter().map(|x| explainer.explain(x)).collect::<Result<_>>()?;
            let cell = |spec: &MetricSpec| -> Result<MetricResult> {
                let score = match spec.family {
                    MetricFamily::Ordering { .. } => {
                        let mut r = ordering_from_explanations(spec, &data.model, &explanations, &eval, &stats, config.seed)?;
                        r.model = data.name.clone();
                        return Ok(r);
                    }
                    MetricFamily::LocalAccuracy => local_accuracy_from(&explanations, &outputs)?.score,
                    MetricFamily::Consistency => consistency_rating(method.as_str())?.score(),
                    MetricFamily::Runtime => {
                        runtime_metric(|| build_explainer(method, &data.model, &data.train, &settings), eval.rows())?
                            .seconds_per_1000
                    }
                };
                Ok(MetricResult {
                    explainer: method.to_string(),
                    model: data.name.clone(),
                    metric: spec.name(),
                    score,
                    curve: None,
                })
            };
            let (timed, rest): (Vec<&MetricSpec>, Vec<&MetricSpec>) =
                config.metrics.iter().partition(|s| s.family == MetricFamily::Runtime);
            let mut cells: BTreeMap<String, MetricResult> = BTreeMap::new();
            for spec in timed {
                let r = cell(spec)?;
                cells.insert(r.metric.clone(), r);
            }
            for r in rest.par_iter().map(|s| cell(s)).collect::<Result<Vec<_>>>()? {
                cells.insert(r.metric.clone(), r);
            }
            results.extend(config.metrics.iter().map(|s| cells.remove(&s.name()).expect("every metric scored")));
        }
    }
    if let Some(bad) = results.iter().find(|r| !r.score.is_finite()) {
        return Err(Error::Domain(format!(
            "{} scored a non-finite {} on {}",
            bad.explainer, bad.metric, bad.model
        )));
    }
    Ok(BenchReport {
        results,
        lower_is_better: config.metrics.iter().map(|s| (s.name(), s.lower_is_better())).collect(),
    })
}

impl BenchReport {
    /// Long-form `explainer,model,metric,score` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["explainer", "model", "metric", "score"])?;
        for r in &self.results {
            w.write_record([&r.explainer, &r.model, &r.metric, &r.score.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Ordering curves as `explainer,model,metric,fraction,value` rows.
    pub fn write_curves_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["explainer", "model", "metric", "fraction", "value"])?;
        for r in &self.results {
            for (f, v) in r.curve.iter().flatten() {
                w.write_record([&r.explainer, &r.model, &r.metric, &f.to_string(), &v.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn models(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.results {
            if !out.contains(&r.model) {
                out.push(r.model.clone());
            }
        }
        out
    }

    /// Min-max normalized tiles for one model, or averaged over all models
    /// when `model` is `None`.
    pub fn tile(&self, model: Option<&str>) -> Result<Tile> {
        let models = match model {
            Some(m) => vec![m.to_string()],
            None => self.models(),
        };
        let mut metrics: Vec<String> = Vec::new();
        let mut explainers: Vec<String> = Vec::new();
        for r in &self.results {
            if !metrics.contains(&r.metric) {
                metrics.push(r.metric.clone());
            }
            if !explainers.contains(&r.explainer) {
                explainers.push(r.explainer.clone());
            }
        }
        let mut sums = vec![vec![0.0; metrics.len()]; explainers.len()];
        for m in &models {
            for (c, metric) in metrics.iter().enumerate() {
                let scores: Vec<Option<f64>> = explainers
                    .iter()
                    .map(|e| {
                        self.results
                            .iter()
                            .find(|r| &r.model == m && &r.metric == metric && &r.explainer == e)
                            .map(|r| r.score)
                    })
                    .collect();
                if scores.iter().any(Option::is_none) {
                    return Err(Error::Data(format!("model {m} is missing a {metric} cell")));
                }
                let scores: Vec<f64> = scores.into_iter().flatten().collect();
                let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lower = self.lower_is_better.get(metric).copied().unwrap_or(false);
                for (e, s) in scores.iter().enumerate() {
                    sums[e][c] += if hi == lo {
                        1.0
                    } else if lower {
                        (hi - s) / (hi - lo)
                    } else {
                        (s - lo) / (hi - lo)
                    };
                }
            }
        }
        if models.is_empty() {
            return Err(Error::Data("report holds no results".into()));
        }
        let k = models.len() as f64;
        let normalized: Vec<Vec<f64>> = sums.into_iter().map(|row| row.into_iter().map(|v| v / k).collect()).collect();
        let aggregate: Vec<f64> = normalized.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
        let mut order: Vec<usize> = (0..explainers.len()).collect();
        order.sort_by(|&a, &b| aggregate[b].total_cmp(&aggregate[a]).then(a.cmp(&b)));
        Ok(Tile {
            metrics,
            explainers: order.iter().map(|&i| explainers[i].clone()).collect(),
            normalized: order.iter().map(|&i| normalized[i].clone()).collect(),
            aggregate: order.iter().map(|&i| aggregate[i]).collect(),
        })
    }
}

/// Column-normalized scores: 1 is the best explainer on a metric, 0 the
/// worst. Rows are sorted by aggregate (row mean), best first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tile {
    pub metrics: Vec<String>,
    pub explainers: Vec<String>,
    pub normalized: Vec<Vec<f64>>,
    pub aggregate: Vec<f64>,
}

impl Tile {
    pub fn rank_of(&self, explainer: &str) -> Option<usize> {
        self.explainers.iter().position(|e| e == explainer)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["explainer".to_string()];
        header.extend(self.metrics.iter().cloned());
        header.push("aggregate".into());
        w.write_record(&header)?;
        for (e, row) in self.explainers.iter().zip(&self.normalized) {
            let mut rec = vec![e.clone()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            rec.push(format!("{:.6}", self.aggregate[self.rank_of(e).expect("listed")]));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmark::{Direction, Masker, Mode};

    fn result(explainer: &str, metric: &str, score: f64) -> MetricResult {
        MetricResult {
            explainer: explainer.into(),
            model: "m".into(),
            metric: metric.into(),
            score,
            curve: None,
        }
    }

    #[test]
    fn tile_normalizes_with_direction() {
        let report = BenchReport {
            results: vec![
                result("a", "runtime", 1.0),
                result("b", "runtime", 3.0),
                result("a", "consistency", 0.0),
                result("b", "consistency", 1.0),
                result("a", "local_accuracy", 1.0),
                result("b", "local_accuracy", 1.0),
            ],
            lower_is_better: [("runtime", true), ("consistency", false), ("local_accuracy", false)]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        };
        let tile = report.tile(None).unwrap();
        assert_eq!(tile.explainers, ["a", "b"]);
        assert_eq!(tile.normalized[0], [1.0, 0.0, 1.0]);
        assert_eq!(tile.normalized[1], [0.0, 1.0, 1.0]);
        let mut buf = Vec::new();
        tile.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("explainer,runtime,consistency,local_accuracy,aggregate\n"));
    }

    #[test]
    fn missing_cell_is_an_error() {
        let report = BenchReport {
            results: vec![result("a", "runtime", 1.0), result("b", "consistency", 1.0)],
            lower_is_better: BTreeMap::new(),
        };
        assert!(report.tile(None).is_err());
    }

    #[test]
    fn small_benchmark_is_deterministic() {
        let spec = SyntheticSuite {
            features: 6,
            informative: 4,
            train_rows: 200,
            eval_rows: 20,
            boost: BoostConfig {
                rounds: 10,
                depth: 3,
                objective: Objective::Logistic,
                ..BoostConfig::default()
            },
            ..SyntheticSuite::default()
        };
        let suite = synthetic_suite(&spec).unwrap();
        let config = BenchmarkConfig {
            explainers: vec![Method::TreeShap, Method::Saabas, Method::Random],
            metrics: vec![
                MetricSpec::ordering(Mode::Keep, Direction::Positive, Masker::Resample),
                MetricSpec::ordering(Mode::Remove, Direction::Absolute, Masker::Impute),
                MetricSpec::new(MetricFamily::LocalAccuracy),
            ],
            eval_size: 20,
            ..BenchmarkConfig::default()
        };
        let a = run_benchmark(&suite, &config).unwrap();
        let b = run_benchmark(&suite, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.results.len(), 9);
        assert!(a.results.iter().filter(|r| r.metric.starts_with("keep")).all(|r| r.curve.as_ref().unwrap().len() == 11));
    }
}
