use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("class {class} cannot be represented in the training partition")]
    ClassTooSmall { class: usize },
    #[error("{available} samples cannot fill {folds} folds")]
    TooFewSamples { available: usize, folds: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("invalid probability matrix: {0}")]
    InvalidProbabilities(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("cannot fit on empty input")]
    EmptyInput,
    #[error("feature width {got} does not match training width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("model is not fitted")]
    NotFitted,
    #[error("model `{0}` is predict-only and cannot be refit")]
    RefitUnsupported(String),
    #[error("only one class present in labels")]
    SingleClass,
    #[error("no group column available")]
    NoGroups,
    #[error("chance agreement is 1; kappa undefined")]
    DegenerateAgreement,
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("no critical value tabulated for K={0}")]
    UnsupportedK(usize),
    #[error("{0} non-zero differences; at least 5 required")]
    TooFewPairs(usize),
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("only {0} datasets are common to every ranked method")]
    InsufficientOverlap(usize),
    #[error("worker protocol error: {0}")]
    Protocol(String),
    #[error("worker timed out after {0} s")]
    Timeout(u64),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Variant name, used as the error tag in run records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::ClassTooSmall { .. } => "ClassTooSmall",
            Error::TooFewSamples { .. } => "TooFewSamples",
            Error::InvalidParameter(_) => "InvalidParameter",
            Error::InvalidDataset(_) => "InvalidDataset",
            Error::InvalidProbabilities(_) => "InvalidProbabilities",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::EmptyInput => "EmptyInput",
            Error::WidthMismatch { .. } => "WidthMismatch",
            Error::NotFitted => "NotFitted",
            Error::RefitUnsupported(_) => "RefitUnsupported",
            Error::SingleClass => "SingleClass",
            Error::NoGroups => "NoGroups",
            Error::DegenerateAgreement => "DegenerateAgreement",
            Error::DegenerateInput(_) => "DegenerateInput",
            Error::UnsupportedK(_) => "UnsupportedK",
            Error::TooFewPairs(_) => "TooFewPairs",
            Error::ZeroVariance(_) => "ZeroVariance",
            Error::InsufficientOverlap(_) => "InsufficientOverlap",
            Error::Protocol(_) => "Protocol",
            Error::Timeout(_) => "Timeout",
            Error::Config(_) => "Config",
            Error::Io(_) => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
        }
    }
}
