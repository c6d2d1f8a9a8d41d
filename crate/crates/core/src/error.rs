use thiserror::Error;

/// Errors raised by the forecasting engine and its stores.
#[derive(Debug, Error)]
pub enum Error {
    #[error("no cases available for the requested context")]
    NoData,

    #[error("no landmark transition precedes the query time")]
    InsufficientHistory,

    #[error("no probability mass survives past the elapsed time")]
    NoSurvivingMass,

    #[error("quantile {p} exceeds the distribution's terminal mass {f_max}")]
    QuantileUnattainable { p: f64, f_max: f64 },

    #[error("model cannot be trained: {0}")]
    ModelDegenerate(String),

    #[error("input is not sorted by timestamp: {0}")]
    Unsorted(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("attribute value outside its declared domain: {0}")]
    SchemaMismatch(String),

    #[error("meeting scopes overlap: {0}")]
    OverlappingScopes(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("query time {0} lies outside the logged horizon")]
    OutsideHorizon(String),

    #[error("malformed record at {path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name, used on stderr and in service payloads.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NoData => "NoData",
            Error::InsufficientHistory => "InsufficientHistory",
            Error::NoSurvivingMass => "NoSurvivingMass",
            Error::QuantileUnattainable { .. } => "QuantileUnattainable",
            Error::ModelDegenerate(_) => "ModelDegenerate",
            Error::Unsorted(_) => "Unsorted",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::InvalidInput(_) => "InvalidInput",
            Error::SchemaMismatch(_) => "SchemaMismatch",
            Error::OverlappingScopes(_) => "OverlappingScopes",
            Error::NotFound(_) => "NotFound",
            Error::OutsideHorizon(_) => "OutsideHorizon",
            Error::Parse { .. } => "Parse",
            Error::Io(_) => "Io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
