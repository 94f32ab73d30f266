use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid size must be an even integer >= 8, got {0}")]
    GridSize(usize),

    #[error("{name} = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("field must have zero mean, found mean {mean:e}")]
    NonZeroMean { mean: f64 },

    #[error("field mean {found} does not match the mean mass {expected}")]
    MeanMismatch { expected: f64, found: f64 },

    #[error("the sin^2 kernel representation requires half-length pi, got {0}")]
    PeriodMismatch(f64),

    #[error("constant field has no finite modulus slope")]
    ConstantField,

    #[error("grids of the two fields differ")]
    GridMismatch,

    #[error("decay fit needs at least {needed} positive samples in the window, found {found}")]
    InsufficientSamples { needed: usize, found: usize },

    #[error("decay experiment requires chi*m < 1, got {0}")]
    DecayHypothesis(f64),

    #[error("integration stopped with {status} at t = {t}")]
    RunFailed { status: &'static str, t: f64 },

    #[error("config line {line}: {key}: {msg}")]
    Config {
        line: usize,
        key: String,
        msg: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(line: usize, key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            line,
            key: key.into(),
            msg: msg.into(),
        }
    }
}
