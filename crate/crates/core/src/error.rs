use num_complex::Complex64;
use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// The variants split into two families: input validation (bad parameters,
/// evaluation outside a domain) and numerical non-convergence. The CLI maps
/// them onto distinct exit codes through [`LabError::is_convergence_failure`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("empty divisor")]
    EmptyDivisor,

    #[error("undecidable, supply tail model")]
    Undecidable,

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("origin is not allowed in a divisor; translate the function first")]
    ZeroInDivisor,

    #[error("outside {region} (s = {s})")]
    OutsideHalfPlane { region: &'static str, s: Complex64 },

    #[error("evaluation at divisor point {rho} of multiplicity {mult}")]
    AtDivisorPoint { rho: Complex64, mult: i64 },

    #[error("pole at {0}")]
    Pole(Complex64),

    #[error("evaluator failed on the line at t = {t}: {reason}")]
    LineEvaluation { t: f64, reason: String },

    #[error("pairing did not converge: {0}")]
    PairingNotConverged(String),

    #[error("quadrature did not converge: {0}")]
    QuadratureNotConverged(String),

    #[error("discrepancy extraction invalid here: {0}")]
    ExtractionInvalid(String),

    #[error(
        "a non-constant Dirichlet series has convergence exponent at least 2, got d = {d}; \
         the divisor model is wrong"
    )]
    DirichletExponentTooSmall { d: u32 },
}

impl LabError {
    pub fn is_convergence_failure(&self) -> bool {
        matches!(
            self,
            LabError::PairingNotConverged(_) | LabError::QuadratureNotConverged(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
