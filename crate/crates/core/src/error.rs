use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("line {line}: timestamp {current} ms does not follow {previous} ms")]
    NonMonotonicTimestamp { line: usize, previous: i64, current: i64 },

    #[error("line {line}: non-finite value in column {column}")]
    NonFiniteValue { line: usize, column: String },

    #[error("trace needs at least two samples")]
    EmptyTrace,

    #[error("unsupported schema version {found:?}, expected {expected:?}")]
    SchemaVersionMismatch { found: String, expected: &'static str },

    #[error("initialization window is not static: {0}")]
    NotStatic(String),

    #[error("sample time {current} ms is not after filter time {last} ms")]
    NonIncreasingTime { last: i64, current: i64 },

    #[error("signal is empty")]
    EmptySignal,

    #[error("requested {k} coefficients from a window of {available} samples")]
    KTooLarge { k: usize, available: usize },

    #[error("insufficient training examples: {0}")]
    InsufficientExamples(String),

    #[error("feature vector has {found} values, model expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0} model is not trained")]
    ModelNotTrained(&'static str),

    #[error("no evidence to classify")]
    EmptyEvidence,

    #[error("need at least {needed} events, found {found}")]
    TooFewEvents { needed: usize, found: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("no usable data")]
    EmptyData,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("no vehicle entry evidence")]
    NoEntryEvidence,

    #[error("empty input")]
    EmptyInput,
}

impl Error {
    /// Errors caused by a missing, malformed or incompatible model rather
    /// than by the input data.
    pub fn is_model_error(&self) -> bool {
        matches!(
            self,
            Error::SchemaVersionMismatch { .. }
                | Error::ModelNotTrained(_)
                | Error::DimensionMismatch { .. }
        )
    }
}
