use num_complex::Complex64;
use thiserror::Error;

/// Errors produced anywhere in the conversion pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("non-finite value produced at step {step}: {detail}")]
    Overflow { step: usize, detail: String },

    #[error("region enumeration refused: dimension {dim} exceeds the cap of {cap}; use per-region access instead")]
    EnumerationCap { dim: usize, cap: usize },

    #[error("decomposition failed to converge for matrix {fingerprint}")]
    Decomposition { fingerprint: String },

    #[error("matrix is singular (smallest eigenvalue magnitude {min_abs_eigenvalue:e})")]
    Singular { min_abs_eigenvalue: f64 },

    #[error("accuracy target missed: {what} residual {residual:e} exceeds {tolerance:e}")]
    Accuracy {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("region {ordinal} is not convertible: W_omega must be invertible ({detail})")]
    NotConvertible { ordinal: u64, detail: String },

    #[error("integral of the matrix exponential is singular: eigenvalue {eigenvalue} satisfies lambda*T in 2*pi*i*Z\\{{0}}")]
    IntegralSingular { eigenvalue: Complex64 },

    #[error("no region converted successfully ({failed} regions failed)")]
    ModelNotConvertible { failed: usize },

    #[error("no continuous system available for region {ordinal}: {detail}")]
    MissingRegion { ordinal: u64, detail: String },

    #[error("imaginary state component {max_imag:e} exceeds the real-trajectory tolerance")]
    ImaginaryResidue { max_imag: f64 },

    #[error("event accumulation: {events} boundary events within one step of length {dt}")]
    Zeno { events: usize, dt: f64 },

    #[error("trajectory would be empty: {0}")]
    EmptyTrajectory(String),

    #[error("complex generator rejected: {0}")]
    ComplexSystem(String),

    #[error("Newton iteration: {0}")]
    Newton(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
