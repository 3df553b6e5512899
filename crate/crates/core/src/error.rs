use thiserror::Error;

/// Every failure the library can report.
///
/// Numerical failures carry the quantity that tripped the check so callers
/// can log it or decide to retry with different tolerances.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("matrix bonds overlap on Majorana index {index}; split the term list into disjoint factors")]
    OverlappingBonds { index: usize },

    #[error("quasi-energy pairing failed: eigenvalue {value} has no partner (residual {residual:.3e})")]
    PairingFailed { value: String, residual: f64 },

    #[error("eigenvector matrix is ill-conditioned (condition number {cond:.3e})")]
    IllConditioned { cond: f64 },

    #[error("phase classification is ambiguous: {0}")]
    AmbiguousClassification(String),

    #[error("could not repair degenerate eigenvector pairs: {0}")]
    DegeneracyRepairFailed(String),

    #[error("input matrix is not antisymmetric (residual {residual:.3e})")]
    NonAntisymmetricInput { residual: f64 },

    #[error("transfer matrix undefined: {0}")]
    SingularParameters(String),

    #[error("edge mode is not localized: |lambda_1| = {lambda:.6}")]
    NotLocalized { lambda: f64 },

    #[error("unsupported coupling pattern: {0}")]
    UnsupportedCouplingPattern(String),

    #[error("no eigenvalue within {tol:.3e} of {target}; closest is {distance:.3e} away")]
    NoCandidateMode { target: f64, distance: f64, tol: f64 },

    #[error("annihilator columns became linearly dependent (pivot ratio {ratio:.3e})")]
    RankCollapse { ratio: f64 },

    #[error("ODE step size underflow at x = {x}")]
    StepSizeUnderflow { x: f64 },

    #[error("mid-gap mode with |Im| = {im:.3e} has no selected occupation")]
    DegenerateImaginaryPart { im: f64 },

    #[error("Pfaffian needs an even dimension, got {0}")]
    OddDimension(usize),

    #[error("matrix is not antisymmetric (residual {residual:.3e})")]
    NotAntisymmetric { residual: f64 },

    #[error("system size {l} exceeds the limit {max} for this operation")]
    SizeExceeded { l: usize, max: usize },

    #[error("linear algebra backend: {0}")]
    Linalg(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl Error {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParams(_) => "invalid_params",
            Error::OverlappingBonds { .. } => "overlapping_bonds",
            Error::PairingFailed { .. } => "pairing_failed",
            Error::IllConditioned { .. } => "ill_conditioned",
            Error::AmbiguousClassification(_) => "ambiguous_classification",
            Error::DegeneracyRepairFailed(_) => "degeneracy_repair_failed",
            Error::NonAntisymmetricInput { .. } => "non_antisymmetric_input",
            Error::SingularParameters(_) => "singular_parameters",
            Error::NotLocalized { .. } => "not_localized",
            Error::UnsupportedCouplingPattern(_) => "unsupported_coupling_pattern",
            Error::NoCandidateMode { .. } => "no_candidate_mode",
            Error::RankCollapse { .. } => "rank_collapse",
            Error::StepSizeUnderflow { .. } => "step_size_underflow",
            Error::DegenerateImaginaryPart { .. } => "degenerate_imaginary_part",
            Error::OddDimension(_) => "odd_dimension",
            Error::NotAntisymmetric { .. } => "not_antisymmetric",
            Error::SizeExceeded { .. } => "size_exceeded",
            Error::Linalg(_) => "linalg",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    /// Whether the error comes from bad input rather than from the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParams(_) | Error::Config(_) | Error::Json(_) | Error::SizeExceeded { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
