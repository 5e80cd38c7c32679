use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Domain errors (everything except `Io`/`Format`)
/// map to CLI exit code 1; usage and file-format problems map to 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("ambiguous standard `{std}`: {candidates} candidate peak(s) within ±{window} s of {hint} s")]
    AmbiguousStandard {
        std: String,
        hint: f64,
        window: f64,
        candidates: usize,
    },

    #[error("elution-order violation: {0}")]
    OrderViolation(String),

    #[error("hybridization coefficients must sum to 1 (got {0})")]
    NonAffine(f64),

    #[error("empty library: no trajectories to match against")]
    EmptyLibrary,

    #[error("no admissible assignment: {0}")]
    NoAssignment(String),

    #[error("unscorable assignment: zero paired compounds")]
    Unscorable,

    #[error("unknown format version {0}")]
    UnknownVersion(u32),

    #[error("fit did not converge: {msg} (residual rms {rms:.6})")]
    NonConvergence { msg: String, rms: f64 },

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
