use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which density-matrix invariant a candidate violated, and by how much.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Largest entry of `m - m*`.
    NotHermitian { deviation: f64 },
    /// Most negative eigenvalue.
    NegativeEigenvalue { eigenvalue: f64 },
    /// Trace differs from one.
    TraceNotOne { trace: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NotHermitian { deviation } => {
                write!(f, "not Hermitian: max |m - m*| = {deviation:e}")
            }
            Violation::NegativeEigenvalue { eigenvalue } => {
                write!(f, "negative eigenvalue {eigenvalue}")
            }
            Violation::TraceNotOne { trace } => write!(f, "trace {trace} != 1"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid dimension {0}: need N >= 2")]
    InvalidDimension(usize),

    #[error("index {index} out of range: {reason}")]
    Index { index: usize, reason: String },

    #[error("density-matrix violation: {0}")]
    Violation(Violation),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("inconsistent measurement data: {0}")]
    Data(String),

    #[error("property violated: {0}")]
    PropertyViolation(String),

    #[error("numerical degeneracy: {0}")]
    NumericalDegeneracy(String),

    #[error("integration accuracy lost (Wronskian drift {drift:e}); try a step smaller than {step}")]
    Accuracy { drift: f64, step: f64 },

    #[error("under-determined: design rank {rank} < {required}")]
    UnderDetermined {
        rank: usize,
        required: usize,
        /// Orthonormal basis (rows) of the determined subspace of system
        /// components.
        determined: Vec<Vec<f64>>,
    },

    #[error("no information: {0}")]
    NoInformation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("pivot error: {0}")]
    Pivot(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::Shape(_) => "shape",
            Error::InvalidDimension(_) => "invalid-dimension",
            Error::Index { .. } => "index",
            Error::Violation(_) => "violation",
            Error::Consistency(_) => "consistency",
            Error::Data(_) => "data",
            Error::PropertyViolation(_) => "property-violation",
            Error::NumericalDegeneracy(_) => "numerical-degeneracy",
            Error::Accuracy { .. } => "accuracy",
            Error::UnderDetermined { .. } => "under-determined",
            Error::NoInformation(_) => "no-information",
            Error::Domain(_) => "domain",
            Error::Resolution(_) => "resolution",
            Error::Pivot(_) => "pivot",
            Error::Config(_) => "config",
            Error::Json(_) => "json",
        }
    }
}
