use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix entry (row, col) differs from its transpose by more than the
    /// symmetry tolerance.
    NotSymmetric {
        row: usize,
        col: usize,
        deviation: f64,
    },
    DimensionZero,
    /// Entry buffer does not hold `dim * dim` values.
    ShapeMismatch {
        dim: usize,
        len: usize,
    },
    /// An eigenvalue is negative beyond the null tolerance.
    NotPsd {
        eigenvalue: f64,
        tolerance: f64,
    },
    AllComponentsNull,
    /// Eigenvalue list contains a non-positive or non-finite entry.
    InvalidEigenvalue {
        index: usize,
        value: f64,
    },
    NonPositiveDistortion(f64),
    InvalidPerception(f64),
    /// A kernel was evaluated outside its domain.
    DomainError(&'static str),
    /// A stationary map needs both multipliers strictly positive.
    DualDegenerate {
        nu1: f64,
        nu2: f64,
    },
    InfeasibleQuery {
        distortion: f64,
        perception: f64,
        reason: &'static str,
    },
    OutOfRange {
        value: f64,
        lower: f64,
        upper: f64,
    },
    /// A root finder found no sign change on its bracket.
    NoBracket {
        stage: &'static str,
    },
    ConvergenceFailure {
        stage: &'static str,
        iterations: usize,
        residual: f64,
    },
    InfeasibleSeed,
    LineSearchFailure {
        stage: &'static str,
    },
    /// A 2x2 sampling covariance could not be factored.
    NonPsd {
        determinant: f64,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotSymmetric { row, col, deviation } => write!(
                f,
                "matrix is not symmetric: entry ({row}, {col}) differs from its transpose by {deviation:e}"
            ),
            Error::DimensionZero => write!(f, "matrix dimension must be at least 1"),
            Error::ShapeMismatch { dim, len } => {
                write!(f, "expected {} entries for a {dim}x{dim} matrix, got {len}", dim * dim)
            }
            Error::NotPsd { eigenvalue, tolerance } => write!(
                f,
                "covariance is not positive semidefinite: eigenvalue {eigenvalue:e} below -{tolerance:e}"
            ),
            Error::AllComponentsNull => write!(f, "every eigenvalue is numerically zero"),
            Error::InvalidEigenvalue { index, value } => {
                write!(f, "eigenvalue #{index} must be positive and finite, got {value}")
            }
            Error::NonPositiveDistortion(d) => write!(f, "distortion budget must be positive, got {d}"),
            Error::InvalidPerception(p) => write!(f, "perception budget must be nonnegative, got {p}"),
            Error::DomainError(what) => write!(f, "argument outside domain: {what}"),
            Error::DualDegenerate { nu1, nu2 } => {
                write!(f, "both multipliers must be positive (nu1 = {nu1:e}, nu2 = {nu2:e})")
            }
            Error::InfeasibleQuery {
                distortion,
                perception,
                reason,
            } => {
                write!(f, "query (D = {distortion}, P = {perception}) is infeasible: {reason}")
            }
            Error::OutOfRange { value, lower, upper } => {
                write!(f, "value {value} outside the open range ({lower}, {upper})")
            }
            Error::NoBracket { stage } => write!(f, "{stage}: no sign change on the search bracket"),
            Error::ConvergenceFailure {
                stage,
                iterations,
                residual,
            } => write!(
                f,
                "{stage}: no convergence after {iterations} iterations (residual {residual:e})"
            ),
            Error::InfeasibleSeed => write!(f, "no strictly feasible starting point found"),
            Error::LineSearchFailure { stage } => write!(f, "{stage}: line search failed"),
            Error::NonPsd { determinant } => {
                write!(f, "covariance factorization failed (determinant {determinant:e})")
            }
        }
    }
}

impl core::error::Error for Error {}
