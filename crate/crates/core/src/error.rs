use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the lab.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("predictor returned non-finite value {value} at grid point {point:?}")]
    Tabulation { point: Vec<f64>, value: f64 },

    #[error("grid weights are not product-form; use decompose_weighted instead")]
    WrongWeights,

    #[error("degenerate density: {0}")]
    DegenerateDensity(String),

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    Dimension {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("distillation failed: teacher returned non-finite value {value} on sample {sample}")]
    Distillation { sample: usize, value: f64 },

    #[error("nothing to verify: {0}")]
    NothingToVerify(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {what}: {detail}")]
    Parse { what: String, detail: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Parse {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
