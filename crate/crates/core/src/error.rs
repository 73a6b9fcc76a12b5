use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The model document could not be decoded. `path` is the JSON path of
    /// the offending value (`.` for the document root).
    #[error("failed to parse model at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("invalid model: tree {tree}, node {node}: {message}")]
    InvalidTree {
        tree: usize,
        node: usize,
        message: String,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error(
        "brute-force explanation over {features} features needs 2^{features} subset evaluations; \
         the cap is {cap} features (raise it explicitly to proceed)"
    )]
    OracleCap { features: usize, cap: usize },

    #[error("background set is empty")]
    EmptyBackground,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("insufficient budget: {needed} model evaluations required, {given} given")]
    InsufficientBudget { needed: usize, given: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dataset error: {0}")]
    Data(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the caller's inputs (bad model, bad shape,
    /// refused workload) rather than by a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::InvalidTree { .. }
                | Error::InvalidModel(_)
                | Error::Dimension { .. }
                | Error::OracleCap { .. }
                | Error::EmptyBackground
                | Error::Domain(_)
                | Error::Unsupported(_)
                | Error::InsufficientBudget { .. }
                | Error::InvalidInput(_)
                | Error::Data(_)
        )
    }
}
