use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("unknown or unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("ansatz (b_ff = {b_ff}, b_gg = {b_gg}) is negative on the angular grid (minimum density {min_density:e})")]
    InfeasibleAnsatz { b_ff: f64, b_gg: f64, min_density: f64 },

    #[error("histogram has no analytic column")]
    MissingAnalytic,

    #[error("bin {bin} has expected count {expected:.3} < 5")]
    LowExpectedCount { bin: usize, expected: f64 },

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
