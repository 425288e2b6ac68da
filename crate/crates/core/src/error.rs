use thiserror::Error;

pub type Result<T> = std::result::Result<T, QmlError>;

/// Every failure the toolkit can report.
///
/// The variants are grouped by the stage that raises them; the CLI maps
/// configuration problems to exit code 2 and everything else to a failed
/// report, and the C ABI maps each variant onto a stable status code.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QmlError {
    #[error("syntax error at position {pos}: {msg}")]
    Syntax { pos: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("derivative order {0} out of range (supported: 0..=3)")]
    Order(usize),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("step size underflow at s = {s}")]
    StepUnderflow { s: f64 },

    #[error("invalid defining function: {0}")]
    InvalidDefiningFunction(String),

    #[error("base point not normalised: {0}")]
    Normalization(String),

    #[error("Nyquist violation on axis {axis}: {msg}")]
    Nyquist { axis: usize, msg: String },

    #[error("resolution check failed: {0}")]
    Resolution(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("non-positive sample: {0}")]
    NonPositiveSample(String),

    #[error("memory budget exceeded: need {needed} bytes, budget {budget} bytes")]
    MemoryBudget { needed: u64, budget: u64 },

    #[error("unknown builtin symbol '{0}'")]
    UnknownBuiltin(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for QmlError {
    fn from(e: std::io::Error) -> Self {
        QmlError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for QmlError {
    fn from(e: serde_json::Error) -> Self {
        QmlError::Config(e.to_string())
    }
}

impl From<csv::Error> for QmlError {
    fn from(e: csv::Error) -> Self {
        QmlError::Io(e.to_string())
    }
}
