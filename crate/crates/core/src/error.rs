// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

/// Every failure the analysis pipeline can raise.
///
/// Findings (a failed detailed-balance verdict, an obstruction flag) are
/// report content, not errors. The variants here mean a computation could
/// not be carried out or a precondition was refused.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (max |M - M^dagger| = {residual:.3e})")]
    NotHermitian { residual: f64 },
    #[error("iteration did not converge: {context}")]
    NoConvergence { context: String },
    #[error("matrix is not positive definite (pivot {pivot} = {value:.3e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("non-finite matrix entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("state is not faithful (min eigenvalue {min_eigenvalue:.3e} <= {threshold:.1e})")]
    NotFaithful { min_eigenvalue: f64, threshold: f64 },
    #[error("Kraus list is empty")]
    EmptyKrausList,
    #[error("state is not invariant under the channel (residual {residual:.3e} > {tol:.1e})")]
    NotInvariant { residual: f64, tol: f64 },
    #[error("GNS operator is not a contraction (norm {norm:.12} exceeds 1 + {tol:.1e})")]
    ContractionViolation { norm: f64, tol: f64 },
    #[error("operator is not a contraction: {reason}")]
    NotContraction { reason: String },
    #[error("channel is not unital (residual {residual:.3e}); {stage} requires a unital map")]
    NotUnital { residual: f64, stage: String },
    #[error("inconsistent inputs: {0}")]
    InconsistentInputs(String),
    #[error("decay failure: basis elements {indices:?} do not decay within horizon {horizon}")]
    DecayFailure { indices: Vec<usize>, horizon: u64 },
    #[error("bad parameter: {0}")]
    BadParam(String),
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invariant violation at {path}: {message}")]
    InvariantViolation { path: String, message: String },
    #[error("io error: {0}")]
    Io(String),
}

/// Coarse classification used for report annotations and process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ErrorClass {
    /// The input document is malformed or violates a structural invariant.
    InvalidSpec,
    /// A numerical routine failed to produce an answer.
    Numerical,
    /// A mathematical precondition of the requested analysis does not hold.
    Precondition,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. } | Error::InvariantViolation { .. } => ErrorClass::InvalidSpec,
            Error::NoConvergence { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::NonFinite { .. }
            | Error::Io(_) => ErrorClass::Numerical,
            _ => ErrorClass::Precondition,
        }
    }

    /// Stable variant name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::NotHermitian { .. } => "NotHermitian",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFinite { .. } => "NonFinite",
            Error::NotFaithful { .. } => "NotFaithful",
            Error::EmptyKrausList => "EmptyKrausList",
            Error::NotInvariant { .. } => "NotInvariant",
            Error::ContractionViolation { .. } => "ContractionViolation",
            Error::NotContraction { .. } => "NotContraction",
            Error::NotUnital { .. } => "NotUnital",
            Error::InconsistentInputs(_) => "InconsistentInputs",
            Error::DecayFailure { .. } => "DecayFailure",
            Error::BadParam(_) => "BadParam",
            Error::NotUnitary { .. } => "NotUnitary",
            Error::Parse { .. } => "ParseError",
            Error::InvariantViolation { .. } => "InvariantViolation",
            Error::Io(_) => "IoError",
        }
    }

    pub(crate) fn dims(expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch { expected: expected.to_string(), found: found.to_string() }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
