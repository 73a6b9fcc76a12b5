use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "arbor", version, about = "Explain tree-ensemble predictions with exact Shapley values")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "ARBOR_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Emit JSON records instead of CSV.
    #[arg(long, global = true)]
    pub json: bool,
    /// Output file (defaults to stdout).
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelData {
    /// Model JSON document.
    #[arg(short, long)]
    pub model: PathBuf,
    /// CSV dataset with a header row.
    #[arg(short, long)]
    pub data: PathBuf,
    /// Name of the label column in the dataset, if any.
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExplainMethod {
    Treeshap,
    Saabas,
    Brute,
    Indep,
    Sampling,
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Full,
    Convergence,
    UserStudy,
    FeatureSelection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Interaction {
    Product,
    Min,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Model margin and transformed output for every row.
    Predict(ModelData),
    /// Per-feature attributions for every row.
    Explain {
        #[command(flatten)]
        io: ModelData,
        #[arg(long, value_enum, default_value_t = ExplainMethod::Treeshap)]
        method: ExplainMethod,
        /// Background CSV for indep, sampling and kernel (defaults to the data).
        #[arg(short, long)]
        background: Option<PathBuf>,
        /// Background rows used.
        #[arg(long, default_value_t = 100)]
        references: usize,
        /// Model evaluations per row for sampling and kernel.
        #[arg(long, default_value_t = 2048)]
        budget: usize,
        /// Feature cap for brute-force enumeration.
        #[arg(long, default_value_t = 16)]
        max_features: usize,
    },
    /// Pairwise interaction values as long-form rows.
    Interactions(ModelData),
    /// Benchmark suites.
    Bench(BenchArgs),
    /// Rolling loss attributions over a labelled stream.
    Monitor {
        #[command(flatten)]
        io: ModelData,
        #[arg(short, long)]
        background: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        references: usize,
        /// squared_error or logistic_nll.
        #[arg(long, default_value = "squared_error")]
        loss: String,
        #[arg(long, default_value_t = 100)]
        window: usize,
        /// Column holding nondecreasing timestamps (row order otherwise).
        #[arg(long)]
        time_column: Option<String>,
    },
    /// Global importance: mean absolute attribution per feature.
    Summarize(ModelData),
    /// Feature value against its attribution, with a coloring feature.
    Dependence {
        #[command(flatten)]
        io: ModelData,
        /// Feature name or index.
        #[arg(long)]
        feature: String,
        /// Coloring feature (picked automatically when omitted).
        #[arg(long)]
        color: Option<String>,
    },
    /// Complete-linkage clustering of the attribution rows.
    Cluster {
        #[command(flatten)]
        io: ModelData,
        /// Print the dendrogram leaf order instead of the merges.
        #[arg(long)]
        order: bool,
    },
    /// Principal components of the attribution rows.
    Pca {
        #[command(flatten)]
        io: ModelData,
        #[arg(short = 'k', long, default_value_t = 2)]
        components: usize,
        /// Print loadings and explained variance instead of coordinates.
        #[arg(long)]
        loadings: bool,
    },
    /// Generate models, datasets and fixtures.
    #[command(subcommand)]
    Gen(GenCommand),
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum, default_value_t = Suite::Full)]
    pub suite: Suite,
    /// Full suite: print the normalized tile table.
    #[arg(long)]
    pub tile: bool,
    /// Full suite: also write ordering curves to this CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Full suite: comma-separated explainers.
    #[arg(long, value_delimiter = ',')]
    pub explainers: Vec<String>,
    #[arg(long, default_value_t = 60)]
    pub features: usize,
    #[arg(long, default_value_t = 1000)]
    pub train_rows: usize,
    #[arg(long, default_value_t = 100)]
    pub eval_size: usize,
    #[arg(long, default_value_t = 1)]
    pub models: usize,
    /// Model evaluations per explanation for sampling estimators.
    #[arg(long, default_value_t = 2048)]
    pub budget: usize,
    /// Convergence: model to explain (a random ensemble when omitted).
    #[arg(short, long)]
    pub model: Option<PathBuf>,
    /// Convergence: the first row is explained; the rest form the background.
    #[arg(short, long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1000,4000,16000")]
    pub budgets: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    /// Feature selection: number of informative features.
    #[arg(long, default_value_t = 3)]
    pub n_true: usize,
    #[arg(long, value_enum, default_value_t = Interaction::Min)]
    pub kind: Interaction,
    #[arg(long, default_value_t = 1)]
    pub trees: usize,
    #[arg(long, default_value_t = 20)]
    pub datasets: usize,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Random tree ensemble as a JSON document.
    Model {
        #[arg(long, default_value_t = 10)]
        trees: usize,
        #[arg(long, default_value_t = 5)]
        features: usize,
        #[arg(long, default_value_t = 3)]
        depth: usize,
    },
    /// Uniform random rows, labelled by a model when one is given.
    Data {
        #[arg(long, default_value_t = 100)]
        rows: usize,
        #[arg(long, default_value_t = 5)]
        features: usize,
        #[arg(short, long)]
        model: Option<PathBuf>,
    },
    /// A bundled fixture model.
    Fixture {
        #[arg(long, value_enum)]
        name: Fixture,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Fixture {
    And,
    AndB,
    ScenarioAnd,
    ScenarioOr,
    ScenarioXor,
    ScenarioSum,
}
