use thiserror::Error;

/// Errors returned by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit counts differ: {left} vs {right}")]
    QubitMismatch { left: usize, right: usize },

    #[error("`{what}` has dimension {found}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("operation `{op}` supports at most {max} qubits, got {q}")]
    TooManyQubits { op: &'static str, max: usize, q: usize },

    #[error("the identity Pauli is not allowed here")]
    IdentityPauli,

    #[error("invalid Pauli string `{0}`")]
    InvalidPauliString(String),

    #[error("matrix is not unitary (deviation {0:.3e})")]
    NotUnitary(f64),

    #[error("invalid probability vector: {0}")]
    InvalidProbabilities(String),

    #[error("channel is not trace preserving (first-row deviation {0:.3e})")]
    NotTracePreserving(f64),

    #[error("state difference is not traceless (identity coefficient {0:.3e})")]
    NotTraceless(f64),

    #[error("infidelity r = {0} exceeds 1/3, where the variance bounds are not valid")]
    InfidelityTooLarge(f64),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no half-width in (0, 1 - V^2] reaches the requested confidence with N = {n}")]
    Infeasible { n: u64 },

    #[error("concentration kernel H = {0} is not below 1; N would be unbounded")]
    UnboundedSequences(f64),

    #[error("irrep extraction failed after {attempts} attempts: {reason}")]
    IrrepExtraction { attempts: usize, reason: String },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
