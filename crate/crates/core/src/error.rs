use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    Dimension {
        what: String,
        expected: String,
        found: String,
    },
    #[error("{name} is not symmetric (relative asymmetry {defect:.3e})")]
    NotSymmetric { name: String, defect: f64 },
    #[error("{name} is not positive definite")]
    NotPositiveDefinite { name: String },
    #[error("{name} is not positive definite (smallest eigenvalue {min_eigenvalue:.6e}); input is unphysical")]
    IndefiniteMass { name: String, min_eigenvalue: f64 },
    #[error("{name} is singular: {hint}")]
    Singular { name: String, hint: String },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: String, reason: String },
    #[error("index {index} out of range for {what} (size {size})")]
    IndexOutOfRange {
        what: String,
        index: usize,
        size: usize,
    },
    #[error("duplicate index {index} in {what}")]
    DuplicateIndex { what: String, index: usize },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
    #[error("rank deficient normal matrix (min/max eigenvalue ratio {ratio:.3e}); use alpha > 0 or add sensors")]
    RankDeficient { ratio: f64 },
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn dim(what: &str, expected: impl core::fmt::Display, found: impl core::fmt::Display) -> Error {
    use alloc::string::ToString;
    Error::Dimension {
        what: what.to_string(),
        expected: expected.to_string(),
        found: found.to_string(),
    }
}

pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Error {
    use alloc::string::ToString;
    Error::InvalidParameter {
        name: name.to_string(),
        reason: reason.into(),
    }
}
