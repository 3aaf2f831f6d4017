use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid probability {0}: must lie in [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid alpha {0}: must lie in (0, 1)")]
    InvalidAlpha(f64),
    #[error("invalid gamma {0}")]
    InvalidGamma(f64),
    #[error("invalid distribution parameters: {0}")]
    InvalidParams(String),
    #[error("comparison sample {index} is empty")]
    EmptyComparison { index: usize },
    #[error("chains have unequal lengths ({0} vs {1})")]
    UnequalChainLengths(usize, usize),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("at least {required} replicates are required, got {got}")]
    TooFewReplicates { required: usize, got: usize },
    #[error("exact recursion supports 2 or 3 chains, got {0}; use simulation")]
    UnsupportedChainCount(usize),
    #[error("optimizer did not converge within {0} iterations")]
    NonConvergence(usize),
    #[error("query N={n} outside cached range [{min}, {max}]")]
    OutOfRange { n: usize, min: usize, max: usize },
    #[error("no cached entries for L={l}, alpha={alpha}")]
    MissingSlice { l: usize, alpha: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid number of bins {0}: need at least 2")]
    InvalidBins(usize),
    #[error("AR coefficient {0} must satisfy |phi| < 1")]
    InvalidPhi(f64),
    #[error("chain too short for ESS: {0} draws, need at least 8")]
    ChainTooShort(usize),
    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}
