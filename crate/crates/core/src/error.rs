use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by how the command line maps them onto exit codes,
/// see [`Error::category`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("uncertainty bound violated: v_min = {v_min:.6}, v_max = {v_max:.6}, product {:.6} < 1", v_min * v_max)]
    Uncertainty { v_min: f64, v_max: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("solver accuracy: {0}")]
    SolverAccuracy(String),

    #[error("grid convergence failure: {quantity} changed by {change:.3e} on refinement (tolerance {tolerance:.1e})")]
    GridConvergence {
        quantity: String,
        change: f64,
        tolerance: f64,
    },

    #[error("fitness evaluation failed for genes {genes:?}: {reason}")]
    Fitness { genes: Vec<f64>, reason: String },

    #[error("temporal mode extraction failed: {0}")]
    ModeExtraction(String),

    #[error("phase undefined: {0}")]
    PhaseUndefined(String),

    #[error("rank-deficient fit: {0}")]
    RankDeficient(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("Fock cutoff {cutoff} too small: truncation leakage {leakage:.3e} exceeds {bound:.1e}")]
    Truncation {
        cutoff: usize,
        leakage: f64,
        bound: f64,
    },

    #[error("invalid density matrix: {0}")]
    InvalidDensityMatrix(String),

    #[error("scenario: {0}")]
    Scenario(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(String),

    #[error("output directory is locked: {0}")]
    Locked(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Coarse classification used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Schema,
    Solver,
    Estimation,
    Locked,
    Other,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Scenario(_) | Error::Json(_) => ErrorCategory::Schema,
            Error::SolverAccuracy(_) | Error::GridConvergence { .. } | Error::Fitness { .. } => {
                ErrorCategory::Solver
            }
            Error::ModeExtraction(_)
            | Error::PhaseUndefined(_)
            | Error::RankDeficient(_)
            | Error::Empty(_)
            | Error::GridMismatch(_)
            | Error::Truncation { .. }
            | Error::InvalidDensityMatrix(_) => ErrorCategory::Estimation,
            Error::Locked(_) => ErrorCategory::Locked,
            Error::InvalidParameter(_)
            | Error::Uncertainty { .. }
            | Error::MissingArtifact(_)
            | Error::Io(_) => ErrorCategory::Other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
