use thiserror::Error;

/// Errors surfaced by the library. Each variant is tagged with the module that
/// raised it so pipeline messages stay attributable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("operators: invalid coefficient pair: {0}")]
    OperatorSpec(String),

    #[error("{module}: capacity exceeded: {detail}")]
    Capacity { module: &'static str, detail: String },

    #[error("eigensolver: bracket exhausted while searching for eigenpair {index}: {detail}")]
    BracketExhausted { index: usize, detail: String },

    #[error("eigensolver: internal consistency failure: {0}")]
    Consistency(String),

    #[error("model: {0}")]
    Model(String),

    #[error("posterior: evaluation failed: {0}")]
    Evaluation(String),

    #[error("posterior: optimization failed after {iters} iterations: {detail}")]
    Optimization { iters: usize, detail: String },

    #[error("{module}: matrix is not positive definite ({detail})")]
    IllConditioned { module: &'static str, detail: String },

    #[error("{module}: invalid parameter: {detail}")]
    Parameter { module: &'static str, detail: String },

    #[error("config: {path}: {detail}")]
    Config { path: String, detail: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Parameter {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn capacity(module: &'static str, detail: impl Into<String>) -> Self {
        Error::Capacity {
            module,
            detail: detail.into(),
        }
    }

    pub(crate) fn not_pd(module: &'static str, detail: impl Into<String>) -> Self {
        Error::IllConditioned {
            module,
            detail: detail.into(),
        }
    }
}
