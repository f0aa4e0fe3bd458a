use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("row (u={u}, i={i}) sums to {row_sum}, expected 1")]
    NonStochasticRow { u: usize, i: usize, row_sum: f64 },
    #[error("negative or invalid probability at (u={u}, i={i}, j={j})")]
    NegativeProbability { u: usize, i: usize, j: usize },
    #[error("{what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("probability {0} is outside [0, 1]")]
    InvalidProbability(f64),
    #[error("invalid state count {0}")]
    InvalidStateCount(usize),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },
    #[error("vector lengths differ ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("p has mass at index {index} where q is zero")]
    UnsupportedSupport { index: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("period {period} is not before horizon {horizon}")]
    HorizonExceeded { period: usize, horizon: usize },
    #[error("exact recursion over {remaining} periods exceeds the {limit} node budget")]
    IntractableHorizon { remaining: usize, limit: u64 },
    #[error("singular linear system")]
    SingularSystem,
    #[error("invalid prior: alpha must be positive and finite, got {0}")]
    InvalidPrior(f64),
    #[error("invalid discount {0}: must lie in [0, 1)")]
    InvalidDiscount(f64),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NonStochasticRow { .. } => "NonStochasticRow",
            Error::NegativeProbability { .. } => "NegativeProbability",
            Error::IndexOutOfRange { .. } => "IndexOutOfRange",
            Error::InvalidProbability(_) => "InvalidProbability",
            Error::InvalidStateCount(_) => "InvalidStateCount",
            Error::InvalidShape(_) => "InvalidShape",
            Error::Parse { .. } => "ParseError",
            Error::LengthMismatch { .. } => "LengthMismatch",
            Error::UnsupportedSupport { .. } => "UnsupportedSupport",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::HorizonExceeded { .. } => "HorizonExceeded",
            Error::IntractableHorizon { .. } => "IntractableHorizon",
            Error::SingularSystem => "SingularSystem",
            Error::InvalidPrior(_) => "InvalidPrior",
            Error::InvalidDiscount(_) => "InvalidDiscount",
            Error::InvalidStrategy(_) => "InvalidStrategy",
            Error::Config(_) => "ConfigError",
            Error::Io(_) => "IoError",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn check_index(what: &'static str, index: usize, size: usize) -> Result<()> {
    if index < size {
        Ok(())
    } else {
        Err(Error::IndexOutOfRange { what, index, size })
    }
}
