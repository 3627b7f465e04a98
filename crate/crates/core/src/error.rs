use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },
    #[error("empty sequence")]
    EmptySequence,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("{fraction:.3} of warped frequencies fell outside the grid (threshold {threshold})")]
    OutOfBand { fraction: f64, threshold: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("density failure at level {level}")]
    DensityFailure { level: usize },
    #[error("window condition violated at level {level}: {which}")]
    WindowTooLarge { level: usize, which: String },
    #[error("degenerate set: {0}")]
    DegenerateSet(String),
    #[error("not observable: {0}")]
    NotObservable(String),
    #[error("overflow guard: {0}")]
    Overflow(String),
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument { arg, reason: reason.into() }
}
