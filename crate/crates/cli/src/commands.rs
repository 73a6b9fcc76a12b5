use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use arbor_core::agnostic::{convergence_report, Estimator};
use arbor_core::analysis::{
    dependence_data, explanation_pca, global_importance, monitoring_series, supervised_cluster, ExplanationMatrix,
};
use arbor_core::benchmark::{
    feature_selection_power, run_benchmark, synthetic_suite, user_study_suite, BenchmarkConfig, ExplainerSettings,
    FeatureSelectionConfig, InteractionKind, RankingMethod, SyntheticSuite, UserStudyConfig,
};
use arbor_core::interactions::shap_interaction_batch;
use arbor_core::model::fixtures::{self, ScenarioKind};
use arbor_core::model::{generate_random_ensemble, RandomEnsembleSpec};
use arbor_core::oracle::shapley_exact_with_cap;
use arbor_core::{
    independent_tree_shap, kernel_shap, saabas, sampling_shap, tree_shap_batch, BackgroundSet, Dataset, Error,
    EstimatorConfig, Explanation, LossKind, Method, TreeEnsemble,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::args::{BenchArgs, Cli, Command, ExplainMethod, Fixture, GenCommand, Interaction, ModelData, Suite};
use crate::table::{Cell, Table};

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Self::validation(e.to_string())
        } else {
            Self::runtime(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load_model(path: &Path) -> CliResult<TreeEnsemble> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("cannot read model {}: {e}", path.display())))?;
    TreeEnsemble::from_json(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn load_data(path: &Path, label: Option<&str>) -> CliResult<Dataset> {
    if !path.exists() {
        return Err(CliError::validation(format!("dataset {} does not exist", path.display())));
    }
    Dataset::from_csv_path(path, label).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))
}

fn load_pair(io: &ModelData) -> CliResult<(TreeEnsemble, Dataset)> {
    let model = load_model(&io.model)?;
    let data = load_data(&io.data, io.label.as_deref())?;
    if data.num_columns() != model.num_features() {
        return Err(CliError::validation(format!(
            "{} has {} feature columns but the model expects {}",
            io.data.display(),
            data.num_columns(),
            model.num_features()
        )));
    }
    Ok((model, data))
}

/// Loads the background rows, dropping the label column when the file has one.
fn background(
    path: Option<&Path>,
    label: Option<&str>,
    data: &Dataset,
    references: usize,
    model: &TreeEnsemble,
) -> CliResult<BackgroundSet> {
    let source = match path {
        Some(p) => {
            let mut raw = load_data(p, None)?;
            if let Some(name) = label.filter(|n| raw.column_names().iter().any(|c| c == n)) {
                raw.take_column(name)?;
            }
            raw
        }
        None => data.clone(),
    };
    if source.num_columns() != model.num_features() {
        return Err(CliError::validation(format!(
            "background has {} columns but the model expects {}",
            source.num_columns(),
            model.num_features()
        )));
    }
    Ok(BackgroundSet::from_dataset(&source)?.truncated(references.max(1))?)
}

fn feature_index(spec: &str, names: &[String]) -> CliResult<usize> {
    if let Some(i) = names.iter().position(|n| n == spec) {
        return Ok(i);
    }
    match spec.parse::<usize>() {
        Ok(i) if i < names.len() => Ok(i),
        _ => Err(CliError::validation(format!("unknown feature `{spec}`"))),
    }
}

fn explanation_table(names: &[String], explanations: &[Explanation]) -> Table {
    let mut t = Table::new(["sample".to_string(), "base".to_string()].into_iter().chain(names.iter().cloned()));
    for (i, e) in explanations.iter().enumerate() {
        let mut row: Vec<Cell> = vec![i.into(), e.base.into()];
        row.extend(e.values.iter().map(|&v| Cell::from(v)));
        t.push(row);
    }
    t
}

fn matrix(model: &TreeEnsemble, data: &Dataset) -> CliResult<ExplanationMatrix> {
    let exps = tree_shap_batch(model, data.rows())?;
    Ok(ExplanationMatrix::from_explanations(data.column_names().to_vec(), &exps, data.rows())?)
}

fn emit(cli: &Cli, table: &Table) -> CliResult<()> {
    let out: Box<dyn Write> = match &cli.global.output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    table
        .write(out, cli.global.json)
        .map_err(|e| CliError::runtime(format!("cannot write output: {e}")))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let seed = cli.global.seed;
    let table = match &cli.command {
        Command::Predict(io) => {
            let (model, data) = load_pair(io)?;
            let mut t = Table::new(["sample", "margin", "prediction"]);
            for (i, x) in data.rows().iter().enumerate() {
                t.push(vec![i.into(), model.predict(x)?.into(), model.predict_output(x)?.into()]);
            }
            t
        }
        Command::Explain {
            io,
            method,
            background: bg_path,
            references,
            budget,
            max_features,
        } => {
            let (model, data) = load_pair(io)?;
            let rows = data.rows();
            let exps: Vec<Explanation> = match method {
                ExplainMethod::Treeshap => tree_shap_batch(&model, rows)?,
                ExplainMethod::Saabas => rows.iter().map(|x| saabas(&model, x)).collect::<Result<_, _>>()?,
                ExplainMethod::Brute => rows
                    .par_iter()
                    .map(|x| shapley_exact_with_cap(&model, x, *max_features))
                    .collect::<Result<_, _>>()?,
                ExplainMethod::Indep | ExplainMethod::Sampling | ExplainMethod::Kernel => {
                    let bg = background(bg_path.as_deref(), io.label.as_deref(), &data, *references, &model)?;
                    rows.par_iter()
                        .enumerate()
                        .map(|(i, x)| {
                            let cfg = EstimatorConfig {
                                n_evaluations: *budget,
                                seed: seed.wrapping_add(i as u64),
                                ..EstimatorConfig::default()
                            };
                            match method {
                                ExplainMethod::Indep => independent_tree_shap(&model, x, &bg),
                                ExplainMethod::Sampling => sampling_shap(&model, x, &bg, &cfg),
                                _ => kernel_shap(&model, x, &bg, &cfg),
                            }
                        })
                        .collect::<Result<_, _>>()?
                }
            };
            explanation_table(data.column_names(), &exps)
        }
        Command::Interactions(io) => {
            let (model, data) = load_pair(io)?;
            let names = data.column_names();
            let mut t = Table::new(["sample", "feature_i", "feature_j", "value"]);
            for (s, e) in shap_interaction_batch(&model, data.rows())?.iter().enumerate() {
                t.push(vec![s.into(), "bias".into(), "bias".into(), e.bias().into()]);
                for i in 0..names.len() {
                    for j in 0..names.len() {
                        t.push(vec![s.into(), names[i].as_str().into(), names[j].as_str().into(), e.get(i, j).into()]);
                    }
                }
            }
            t
        }
        Command::Bench(args) => bench(args, seed)?,
        Command::Monitor {
            io,
            background: bg_path,
            references,
            loss,
            window,
            time_column,
        } => {
            let model = load_model(&io.model)?;
            let label = io.label.as_deref().unwrap_or("label");
            let mut data = load_data(&io.data, Some(label))?;
            let timestamps = match time_column {
                Some(c) => data.take_column(c)?,
                None => (0..data.num_rows()).map(|i| i as f64).collect(),
            };
            if data.num_columns() != model.num_features() {
                return Err(CliError::validation(format!(
                    "stream has {} feature columns but the model expects {}",
                    data.num_columns(),
                    model.num_features()
                )));
            }
            let kind: LossKind = loss.parse()?;
            let bg = background(bg_path.as_deref(), io.label.as_deref(), &data, *references, &model)?;
            let series = monitoring_series(&data, &timestamps, &model, kind, &bg, *window)?;
            let names = data.column_names();
            let mut t = Table::new(
                ["index", "timestamp", "loss", "rolling_loss", "rolling_base"]
                    .map(String::from)
                    .into_iter()
                    .chain(names.iter().cloned()),
            );
            for i in 0..series.loss.len() {
                let mut row: Vec<Cell> = vec![
                    i.into(),
                    series.timestamps[i].into(),
                    series.loss[i].into(),
                    series.rolling_loss[i].into(),
                    series.rolling_base[i].into(),
                ];
                row.extend(series.rolling.iter().map(|col| Cell::from(col[i])));
                t.push(row);
            }
            t
        }
        Command::Summarize(io) => {
            let (model, data) = load_pair(io)?;
            let e = matrix(&model, &data)?;
            let mut t = Table::new(["feature", "mean_abs_shap"]);
            for (f, v) in global_importance(&e)? {
                t.push(vec![e.feature_names()[f].as_str().into(), v.into()]);
            }
            t
        }
        Command::Dependence { io, feature, color } => {
            let (model, data) = load_pair(io)?;
            let names = data.column_names();
            let i = feature_index(feature, names)?;
            let k = color.as_deref().map(|c| feature_index(c, names)).transpose()?;
            let d = dependence_data(&matrix(&model, &data)?, i, k)?;
            let color_name = d.color.map_or("color".to_string(), |c| format!("color_{}", names[c]));
            let mut t = Table::new(vec![names[i].clone(), format!("shap_{}", names[i]), color_name]);
            for (v, s, c) in d.points {
                t.push(vec![v.into(), s.into(), c.into()]);
            }
            t
        }
        Command::Cluster { io, order } => {
            let (model, data) = load_pair(io)?;
            let c = supervised_cluster(&matrix(&model, &data)?)?;
            if *order {
                let mut t = Table::new(["position", "sample"]);
                for (p, s) in c.leaf_order.iter().enumerate() {
                    t.push(vec![p.into(), (*s).into()]);
                }
                t
            } else {
                let mut t = Table::new(["step", "left", "right", "distance", "size"]);
                for (s, m) in c.merges.iter().enumerate() {
                    t.push(vec![s.into(), m.left.into(), m.right.into(), m.distance.into(), m.size.into()]);
                }
                t
            }
        }
        Command::Pca { io, components, loadings } => {
            let (model, data) = load_pair(io)?;
            let p = explanation_pca(&matrix(&model, &data)?, *components)?;
            let k = p.loadings.len();
            if *loadings {
                let mut t = Table::new(
                    ["component", "variance", "explained_ratio"]
                        .map(String::from)
                        .into_iter()
                        .chain(data.column_names().iter().cloned()),
                );
                for c in 0..k {
                    let mut row: Vec<Cell> = vec![(c + 1).into(), p.variance[c].into(), p.explained_ratio[c].into()];
                    row.extend(p.loadings[c].iter().map(|&v| Cell::from(v)));
                    t.push(row);
                }
                t
            } else {
                let mut t = Table::new(std::iter::once("sample".to_string()).chain((1..=k).map(|c| format!("pc{c}"))));
                for (s, row) in p.coordinates.iter().enumerate() {
                    let mut cells: Vec<Cell> = vec![s.into()];
                    cells.extend(row.iter().map(|&v| Cell::from(v)));
                    t.push(cells);
                }
                t
            }
        }
        Command::Gen(g) => return generate(cli, g, seed),
    };
    emit(cli, &table)
}

fn bench(args: &BenchArgs, seed: u64) -> CliResult<Table> {
    Ok(match args.suite {
        Suite::Full => {
            let explainers: Vec<Method> = if args.explainers.is_empty() {
                BenchmarkConfig::default().explainers
            } else {
                args.explainers.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
            };
            let suite = synthetic_suite(&SyntheticSuite {
                features: args.features,
                informative: args.features.min(20),
                train_rows: args.train_rows,
                eval_rows: args.eval_size,
                models: args.models,
                seed,
                ..SyntheticSuite::default()
            })?;
            let config = BenchmarkConfig {
                explainers,
                eval_size: args.eval_size,
                settings: ExplainerSettings {
                    budget: args.budget,
                    ..ExplainerSettings::default()
                },
                seed,
                ..BenchmarkConfig::default()
            };
            let report = run_benchmark(&suite, &config)?;
            if let Some(path) = &args.curves {
                let f = File::create(path).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))?;
                report.write_curves_csv(BufWriter::new(f))?;
            }
            if args.tile {
                let tile = report.tile(None)?;
                let mut t = Table::new(
                    std::iter::once("explainer".to_string())
                        .chain(tile.metrics.iter().cloned())
                        .chain(std::iter::once("aggregate".to_string())),
                );
                for (e, (row, agg)) in tile.explainers.iter().zip(tile.normalized.iter().zip(&tile.aggregate)) {
                    let mut cells: Vec<Cell> = vec![e.as_str().into()];
                    cells.extend(row.iter().map(|&v| Cell::from(v)));
                    cells.push((*agg).into());
                    t.push(cells);
                }
                t
            } else {
                let mut t = Table::new(["explainer", "model", "metric", "score"]);
                for r in &report.results {
                    t.push(vec![r.explainer.as_str().into(), r.model.as_str().into(), r.metric.as_str().into(), r.score.into()]);
                }
                t
            }
        }
        Suite::Convergence => {
            let (model, x, bg) = match (&args.model, &args.data) {
                (Some(m), Some(d)) => {
                    let model = load_model(m)?;
                    let data = load_data(d, None)?;
                    if data.num_rows() < 2 {
                        return Err(CliError::validation("convergence needs a row to explain and at least one background row"));
                    }
                    let bg = BackgroundSet::new(data.rows()[1..].to_vec())?.truncated(100)?;
                    (model, data.rows()[0].clone(), bg)
                }
                (None, None) => {
                    let model = generate_random_ensemble(RandomEnsembleSpec {
                        trees: 50,
                        features: 20,
                        max_depth: 5,
                        seed,
                    });
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    let mut rows: Vec<Vec<f64>> = (0..11).map(|_| (0..20).map(|_| rng.random()).collect()).collect();
                    let x = rows.remove(0);
                    (model, x, BackgroundSet::new(rows)?)
                }
                _ => return Err(CliError::validation("convergence takes both --model and --data, or neither")),
            };
            let mut t = Table::new(["estimator", "budget", "evaluations", "max_error", "mean_error", "mean_std", "wall_seconds"]);
            for est in [
                Estimator::Sampling {
                    min_samples_per_feature: 10,
                },
                Estimator::Kernel { l1_penalty: None },
            ] {
                let r = convergence_report(est, &model, &x, &bg, &args.budgets, args.repetitions, seed)?;
                for b in &r.budgets {
                    let mean_std = b.std.iter().sum::<f64>() / b.std.len().max(1) as f64;
                    t.push(vec![
                        r.estimator.as_str().into(),
                        b.budget.into(),
                        b.evaluations.into(),
                        b.max_error.into(),
                        b.mean_error.into(),
                        mean_std.into(),
                        b.wall_seconds.into(),
                    ]);
                }
            }
            t
        }
        Suite::UserStudy => {
            let scores = user_study_suite(&UserStudyConfig {
                seed,
                ..UserStudyConfig::default()
            })?;
            let mut methods: Vec<Method> = Vec::new();
            let mut scenarios: Vec<String> = Vec::new();
            for s in &scores {
                if !methods.contains(&s.method) {
                    methods.push(s.method);
                }
                if !scenarios.contains(&s.scenario) {
                    scenarios.push(s.scenario.clone());
                }
            }
            let mut t = Table::new(std::iter::once("scenario".to_string()).chain(methods.iter().map(|m| m.to_string())));
            for sc in &scenarios {
                let mut row: Vec<Cell> = vec![sc.as_str().into()];
                for m in &methods {
                    let s = scores.iter().find(|s| &s.scenario == sc && s.method == *m).expect("full grid");
                    // Exact methods' residual rounding is reported as zero.
                    row.push(if s.agrees && *m != Method::Sampling { 0.0 } else { s.disagreement }.into());
                }
                t.push(row);
            }
            t
        }
        Suite::FeatureSelection => {
            let report = feature_selection_power(&FeatureSelectionConfig {
                n_true: args.n_true,
                interaction_kind: match args.kind {
                    Interaction::Product => InteractionKind::Product,
                    Interaction::Min => InteractionKind::Min,
                },
                trees: args.trees,
                n_datasets: args.datasets,
                seed,
                ..FeatureSelectionConfig::default()
            })?;
            let mut t = Table::new(["method", "mean_recovery", "p_vs_gain", "p_vs_permutation"]);
            for m in RankingMethod::ALL {
                let p = |b: RankingMethod| -> CliResult<f64> {
                    Ok(if m == b { f64::NAN } else { report.compare(m, b)?.p_value })
                };
                t.push(vec![
                    m.name().into(),
                    report.mean_recovery(m).into(),
                    p(RankingMethod::Gain)?.into(),
                    p(RankingMethod::Permutation)?.into(),
                ]);
            }
            t
        }
    })
}

fn write_text(cli: &Cli, text: &str) -> CliResult<()> {
    let res = match &cli.global.output {
        Some(p) => std::fs::write(p, text),
        None => io::stdout().lock().write_all(text.as_bytes()),
    };
    res.map_err(|e| CliError::runtime(format!("cannot write output: {e}")))
}

fn generate(cli: &Cli, g: &GenCommand, seed: u64) -> CliResult<()> {
    match g {
        GenCommand::Model { trees, features, depth } => {
            if *trees == 0 || *features == 0 || *depth == 0 {
                return Err(CliError::validation("trees, features and depth must be positive"));
            }
            let model = generate_random_ensemble(RandomEnsembleSpec {
                trees: *trees,
                features: *features,
                max_depth: *depth,
                seed,
            });
            write_text(cli, &(model.to_json() + "\n"))
        }
        GenCommand::Fixture { name } => {
            let model = match name {
                Fixture::And => fixtures::and_model(),
                Fixture::AndB => fixtures::and_model_b(),
                Fixture::ScenarioAnd => fixtures::scenario_model(ScenarioKind::And),
                Fixture::ScenarioOr => fixtures::scenario_model(ScenarioKind::Or),
                Fixture::ScenarioXor => fixtures::scenario_model(ScenarioKind::Xor),
                Fixture::ScenarioSum => fixtures::scenario_model(ScenarioKind::Sum),
            };
            write_text(cli, &(model.to_json() + "\n"))
        }
        GenCommand::Data { rows, features, model } => {
            let model = model.as_deref().map(load_model).transpose()?;
            let m = model.as_ref().map_or(*features, |m| m.num_features());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<Vec<f64>> = (0..*rows).map(|_| (0..m).map(|_| rng.random()).collect()).collect();
            let mut t = Table::new((0..m).map(|j| model.as_ref().map_or(format!("f{j}"), |md| md.feature_name(j))).chain(
                model.as_ref().map(|_| "label".to_string()),
            ));
            for x in &data {
                let mut row: Vec<Cell> = x.iter().map(|&v| Cell::from(v)).collect();
                if let Some(md) = &model {
                    row.push(md.predict_output(x)?.into());
                }
                t.push(row);
            }
            emit(cli, &t)
        }
    }
}
