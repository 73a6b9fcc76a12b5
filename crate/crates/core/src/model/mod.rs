//! Tree-ensemble data model: validation, JSON model documents, prediction
//! and expected values, plus synthetic model generation and fitting.

mod data;
pub mod fixtures;
mod fit;
mod generate;
mod tree;

pub use data::Dataset;
pub use fit::{fit_boosted_trees, BoostConfig};
pub use generate::{generate_random_ensemble, RandomEnsembleSpec};
pub use tree::{Tree, TreeBuilder, TreeParts, LEAF};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the summed tree output is mapped to the reported prediction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// The margin is the prediction.
    #[default]
    Raw,
    /// The margin is a log-odds; predictions are probabilities.
    #[serde(alias = "logistic-probability")]
    Logistic,
}

impl Objective {
    pub fn transform(self, margin: f64) -> f64 {
        match self {
            Objective::Raw => margin,
            Objective::Logistic => sigmoid(margin),
        }
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// A black-box row-to-output function. Model-agnostic estimators and the
/// benchmark harness only see models through this trait.
pub trait Model: Sync {
    fn num_features(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> f64;
}

/// Adapts a closure into a [`Model`].
pub struct FnModel<F> {
    num_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(num_features: usize, f: F) -> Self {
        Self { num_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Model for FnModel<F> {
    fn num_features(&self) -> usize {
        self.num_features
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// An additive ensemble of regression trees.
///
/// Immutable after construction. All explanation algorithms work on the
/// margin (`sum of trees + base_offset`); the objective transform is only
/// applied by [`TreeEnsemble::predict_output`].
#[derive(Debug, Clone, PartialEq)]
pub struct TreeEnsemble {
    trees: Vec<Tree>,
    num_features: usize,
    base_offset: f64,
    objective: Objective,
    feature_names: Option<Vec<String>>,
}

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    num_features: usize,
    #[serde(default)]
    base_offset: f64,
    #[serde(default)]
    objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature_names: Option<Vec<String>>,
    trees: Vec<TreeDoc>,
}

#[derive(Serialize, Deserialize)]
struct TreeDoc {
    children_left: Vec<i64>,
    children_right: Vec<i64>,
    children_default: Vec<i64>,
    split_feature: Vec<i64>,
    threshold: Vec<f64>,
    value: Vec<f64>,
    cover: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gain: Option<Vec<f64>>,
}

impl TreeEnsemble {
    pub fn new(trees: Vec<Tree>, num_features: usize) -> Result<Self> {
        for (t, tree) in trees.iter().enumerate() {
            for j in 0..tree.len() {
                if !tree.is_leaf(j) && tree.feature(j) >= num_features {
                    return Err(Error::InvalidTree {
                        tree: t,
                        node: j,
                        message: format!(
                            "split feature {} out of range for {num_features} features",
                            tree.feature(j)
                        ),
                    });
                }
            }
        }
        Ok(Self {
            trees,
            num_features,
            base_offset: 0.0,
            objective: Objective::Raw,
            feature_names: None,
        })
    }

    pub fn with_base_offset(mut self, base_offset: f64) -> Self {
        self.base_offset = base_offset;
        self
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.num_features {
            return Err(Error::InvalidModel(format!(
                "{} feature names given for {} features",
                names.len(),
                self.num_features
            )));
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    /// Parses and validates a model document.
    pub fn from_json(document: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(document);
        let doc: ModelDoc = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        let trees = doc
            .trees
            .into_iter()
            .enumerate()
            .map(|(t, td)| {
                let parts = TreeParts {
                    children_left: td.children_left,
                    children_right: td.children_right,
                    children_default: td.children_default,
                    split_feature: td.split_feature,
                    threshold: td.threshold,
                    value: td.value,
                    cover: td.cover,
                    gain: td.gain,
                };
                Tree::new(parts, doc.num_features).map_err(|e| Tree::with_tree_index(e, t))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ensemble = Self::new(trees, doc.num_features)?
            .with_base_offset(doc.base_offset)
            .with_objective(doc.objective);
        if let Some(names) = doc.feature_names {
            ensemble = ensemble.with_feature_names(names)?;
        }
        Ok(ensemble)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDoc {
            num_features: self.num_features,
            base_offset: self.base_offset,
            objective: self.objective,
            feature_names: self.feature_names.clone(),
            trees: self
                .trees
                .iter()
                .map(|tree| {
                    let p = tree.to_parts();
                    TreeDoc {
                        children_left: p.children_left,
                        children_right: p.children_right,
                        children_default: p.children_default,
                        split_feature: p.split_feature,
                        threshold: p.threshold,
                        value: p.value,
                        cover: p.cover,
                        gain: p.gain,
                    }
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("model document serializes")
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn base_offset(&self) -> f64 {
        self.base_offset
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    /// Name of feature `i`, falling back to `f{i}`.
    pub fn feature_name(&self, i: usize) -> String {
        match &self.feature_names {
            Some(names) => names[i].clone(),
            None => format!("f{i}"),
        }
    }

    pub fn max_depth(&self) -> usize {
        self.trees.iter().map(Tree::max_depth).max().unwrap_or(0)
    }

    pub fn check_row(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(Error::Dimension {
                expected: self.num_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Margin-space output: the sum of the trees plus `base_offset`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check_row(x)?;
        Ok(self.margin(x))
    }

    #[inline]
    pub(crate) fn margin(&self, x: &[f64]) -> f64 {
        self.base_offset + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    /// Prediction with the objective transform applied.
    pub fn predict_output(&self, x: &[f64]) -> Result<f64> {
        Ok(self.objective.transform(self.predict(x)?))
    }

    /// `E[f(x)]` under the cover distribution, in margin space.
    pub fn expected_value(&self) -> f64 {
        self.base_offset + self.trees.iter().map(Tree::expected_value).sum::<f64>()
    }
}

impl Model for TreeEnsemble {
    fn num_features(&self) -> usize {
        self.num_features
    }

    fn evaluate(&self, x: &[f64]) -> f64 {
        self.margin(x)
    }
}
