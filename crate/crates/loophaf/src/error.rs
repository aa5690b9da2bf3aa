//! Error type shared by all modules of the crate.

use thiserror::Error;

/// Errors produced by matrix validation, enumeration, series arithmetic and
/// the numeric identity checks.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("input grid is not square (row {row} has length {len}, expected {expected})")]
    NonSquare {
        row: usize,
        len: usize,
        expected: usize,
    },

    #[error("asymmetry |s[{row},{col}] - s[{col},{row}]| = {deviation:.3e} exceeds tolerance {tolerance:.3e}")]
    AsymmetryExceedsTolerance {
        row: usize,
        col: usize,
        deviation: f64,
        tolerance: f64,
    },

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("matrix dimension {dim} is odd, an even dimension is required")]
    OddDimension { dim: usize },

    #[error("matrix dimension {dim} is even, an odd dimension is required")]
    EvenDimension { dim: usize },

    #[error("matrix dimension {matrix} does not match vector length {vector}")]
    DimensionMismatch { matrix: usize, vector: usize },

    #[error("dimension {dim} exceeds the enumeration cap {cap}")]
    DimensionCapExceeded { dim: usize, cap: usize },

    #[error("total degree {degree} exceeds the series degree cap {cap}")]
    DegreeCapExceeded { degree: usize, cap: usize },

    #[error("series shape mismatch: ({nvars_a} vars, degree {degree_a}) vs ({nvars_b} vars, degree {degree_b})")]
    ShapeMismatch {
        nvars_a: usize,
        degree_a: usize,
        nvars_b: usize,
        degree_b: usize,
    },

    #[error("series has a nonzero constant term where a zero constant term is required")]
    NonzeroConstantTerm,

    #[error("series constant term is not exactly one")]
    ConstantTermNotOne,

    #[error("series matrix constant part is not the identity")]
    NonUnitConstantTerm,

    #[error("linear part has an entry with a nonzero constant term")]
    NonzeroConstantTermInLinearPart,

    #[error("exponent total degree {degree} is out of range for truncation order {max_degree}")]
    DegreeOutOfRange { degree: usize, max_degree: usize },

    #[error("matrix is numerically singular (condition estimate {cond:.3e} exceeds {cap:.3e})")]
    SingularMatrix { cond: f64, cap: f64 },

    #[error("spectral radius estimate {rho:.3e} of Z*S is not below one")]
    NonContractive { rho: f64 },

    #[error("covariance is not positive semidefinite (eigenvalue {eigenvalue:.3e} below {floor:.3e})")]
    NotPositiveSemidefinite { eigenvalue: f64, floor: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
