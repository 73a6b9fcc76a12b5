//! Exact and approximate Shapley-value explanations for tree ensembles.

pub mod agnostic;
pub mod analysis;
pub mod benchmark;
pub mod error;
pub mod explanation;
pub mod indep;
pub mod interactions;
pub mod model;
pub mod oracle;
pub mod stats;
pub mod treeshap;

pub use agnostic::{kernel_shap, sampling_shap, EstimatorConfig};
pub use error::{Error, Result};
pub use explanation::{Explanation, FeatureSubset, InteractionExplanation, Method};
pub use indep::{explain_loss, independent_tree_shap, BackgroundSet, LossKind, LossSpec};
pub use interactions::shap_interaction_values;
pub use model::{
    BoostConfig, Dataset, FnModel, Model, Objective, RandomEnsembleSpec, Tree, TreeBuilder,
    TreeEnsemble, TreeParts,
};
pub use oracle::{exp_value, interaction_exact, saabas, shapley_exact};
pub use treeshap::{tree_shap, tree_shap_batch, SubsetPath};
