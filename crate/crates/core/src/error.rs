use thiserror::Error;

/// Every failure the numerical layers can report.
///
/// Each variant carries a stable machine-readable [`Error::code`] so that
/// experiment reports can surface the failure class without string matching.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("weight is not positive at t = {t} (h = {value})")]
    NonpositiveWeight { t: f64, value: f64 },

    #[error("supplied derivative `{which}` disagrees with finite differences at t = {t}: supplied {supplied}, estimated {estimated}")]
    InconsistentDerivative {
        which: &'static str,
        t: f64,
        supplied: f64,
        estimated: f64,
    },

    #[error("quadrature did not converge: {context} (estimated error {estimate:e})")]
    QuadratureNotConverged { context: String, estimate: f64 },

    #[error("tail criterion not met below the maximal cutoff radius {max_radius}")]
    CutoffTooSmall { max_radius: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("points {i} and {j} are closer than {threshold:e} (distance {distance:e})")]
    DuplicatePoints {
        i: usize,
        j: usize,
        distance: f64,
        threshold: f64,
    },

    #[error("G'(lambda_{index}) = {magnitude:e} is below {threshold:e} times its local scale; nodes are nearly coalescing")]
    NearDoubleZero {
        index: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("function has zero norm")]
    ZeroNorm,

    #[error("no vector orthogonal to the family exists in the ambient space")]
    NoOrthogonalVector,

    #[error("no monomial index n with |<H, z^n>| above threshold")]
    NoUsableIndex,

    #[error("candidate H is not orthogonal to the biorthogonal family (worst pairing {worst:e})")]
    NotOrthogonal { worst: f64 },

    #[error("Q does not vanish on Lambda: residual {residual:e} exceeds {threshold:e}")]
    ResidualTooLarge { residual: f64, threshold: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable code used in machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonpositiveWeight { .. } => "NONPOSITIVE_WEIGHT",
            Error::InconsistentDerivative { .. } => "INCONSISTENT_DERIVATIVE",
            Error::QuadratureNotConverged { .. } => "QUADRATURE_NOT_CONVERGED",
            Error::CutoffTooSmall { .. } => "CUTOFF_TOO_SMALL",
            Error::DimensionMismatch { .. } => "DIMENSION_MISMATCH",
            Error::DuplicatePoints { .. } => "DUPLICATE_POINTS",
            Error::NearDoubleZero { .. } => "NEAR_DOUBLE_ZERO",
            Error::HypothesisViolated(_) => "HYPOTHESIS_VIOLATED",
            Error::ZeroNorm => "ZERO_NORM",
            Error::NoOrthogonalVector => "NO_ORTHOGONAL_VECTOR",
            Error::NoUsableIndex => "NO_USABLE_INDEX",
            Error::NotOrthogonal { .. } => "NOT_ORTHOGONAL",
            Error::ResidualTooLarge { .. } => "RESIDUAL_TOO_LARGE",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
