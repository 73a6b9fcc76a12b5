use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// The algorithm that produced an explanation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Polynomial-time path-dependent Tree SHAP.
    TreeShap,
    /// Exponential-time enumeration over feature subsets.
    Brute,
    /// Interventional Shapley values against a background set.
    Independent,
    Saabas,
    Sampling,
    Kernel,
    /// Global gain totals reused as a local explanation.
    Gain,
    /// Global permutation importance reused as a local explanation.
    Permutation,
    /// Uniform random attributions (benchmark null).
    Random,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::TreeShap,
        Method::Brute,
        Method::Independent,
        Method::Saabas,
        Method::Sampling,
        Method::Kernel,
        Method::Gain,
        Method::Permutation,
        Method::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::TreeShap => "treeshap",
            Method::Brute => "brute",
            Method::Independent => "indep",
            Method::Saabas => "saabas",
            Method::Sampling => "sampling",
            Method::Kernel => "kernel",
            Method::Gain => "gain",
            Method::Permutation => "permutation",
            Method::Random => "random",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method `{s}`")))
    }
}

/// Additive attribution of one prediction: `base + sum(values)` is the
/// explained output for locally accurate methods.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Explanation {
    pub base: f64,
    pub values: Vec<f64>,
    pub method: Method,
    pub sample_index: Option<usize>,
}

impl Explanation {
    pub fn new(base: f64, values: Vec<f64>, method: Method) -> Self {
        Self {
            base,
            values,
            method,
            sample_index: None,
        }
    }

    pub fn with_sample_index(mut self, index: usize) -> Self {
        self.sample_index = Some(index);
        self
    }

    pub fn num_features(&self) -> usize {
        self.values.len()
    }

    /// `base + sum(values)`.
    pub fn total(&self) -> f64 {
        self.base + self.values.iter().sum::<f64>()
    }
}

/// A set of feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FeatureSubset {
    members: Vec<bool>,
}

impl FeatureSubset {
    pub fn empty(num_features: usize) -> Self {
        Self {
            members: vec![false; num_features],
        }
    }

    pub fn full(num_features: usize) -> Self {
        Self {
            members: vec![true; num_features],
        }
    }

    pub fn from_indices(num_features: usize, indices: &[usize]) -> Result<Self> {
        let mut s = Self::empty(num_features);
        for &i in indices {
            if i >= num_features {
                return Err(Error::InvalidInput(format!(
                    "feature {i} out of range for {num_features} features"
                )));
            }
            if s.members[i] {
                return Err(Error::InvalidInput(format!("feature {i} listed twice")));
            }
            s.members[i] = true;
        }
        Ok(s)
    }

    /// Subset encoded by the low bits of `mask`.
    pub fn from_mask(num_features: usize, mask: u64) -> Self {
        Self {
            members: (0..num_features).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.members[i]
    }

    pub fn insert(&mut self, i: usize) {
        self.members[i] = true;
    }

    pub fn remove(&mut self, i: usize) {
        self.members[i] = false;
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn num_features(&self) -> usize {
        self.members.len()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i)
    }
}

/// Main and pairwise interaction effects of one prediction.
///
/// Stored as an `(M+1) x (M+1)` matrix with the bias term `f_x(∅)` in
/// slot `[0][0]` and feature `i` at row/column `i + 1`. The whole matrix
/// sums to the model output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InteractionExplanation {
    num_features: usize,
    matrix: Vec<f64>,
}

impl InteractionExplanation {
    pub(crate) fn zeros(num_features: usize, bias: f64) -> Self {
        let n = num_features + 1;
        let mut matrix = vec![0.0; n * n];
        matrix[0] = bias;
        Self {
            num_features,
            matrix,
        }
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn bias(&self) -> f64 {
        self.matrix[0]
    }

    /// Effect for features `i` and `j` (0-based); `i == j` is the main effect.
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i + 1) * (self.num_features + 1) + j + 1]
    }

    #[inline]
    pub(crate) fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.num_features + 1;
        self.matrix[(i + 1) * n + j + 1] = v;
    }

    /// Sets an off-diagonal pair symmetrically.
    pub(crate) fn set_pair(&mut self, i: usize, j: usize, v: f64) {
        self.set(i, j, v);
        self.set(j, i, v);
    }

    /// The full matrix including the bias row and column.
    pub fn full_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.num_features + 1;
        self.matrix.chunks(n).map(<[f64]>::to_vec).collect()
    }

    pub fn total(&self) -> f64 {
        self.matrix.iter().sum()
    }

    /// Row sums over features, which reproduce the SHAP values.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.num_features)
            .map(|i| (0..self.num_features).map(|j| self.get(i, j)).sum())
            .collect()
    }
}
