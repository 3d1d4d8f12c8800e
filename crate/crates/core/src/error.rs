use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}, line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown firm id `{0}`")]
    UnknownFirm(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("firm {firm} has zero {direction} strength; its io vector is undefined")]
    UndefinedVector {
        firm: usize,
        direction: &'static str,
    },

    #[error("io vectors differ in direction or length")]
    VectorMismatch,

    #[error("io vector of firm {0} is not 1-normalised")]
    NotNormalized(usize),

    #[error("both binary masks are empty")]
    EmptyMasks,

    #[error("undefined quantity: {0}")]
    Undefined(String),

    #[error("industry {industry}: target exceeds what the donor distribution can reach")]
    InfeasibleTarget { industry: usize },

    #[error("industry {industry}: rescaling did not converge after {iterations} iterations (residuals {res_in:.6}, {res_out:.6})")]
    RescaleDiverged {
        industry: usize,
        iterations: usize,
        res_in: f64,
        res_out: f64,
    },

    #[error("scenario {scenario} failed after {attempts} attempts: {last}")]
    ScenarioFailed {
        scenario: usize,
        attempts: usize,
        last: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: u64, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
