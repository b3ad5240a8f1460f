use thiserror::Error;

/// Errors shared by all modules. Variants carry enough context to be
/// rendered as machine-readable diagnostics by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("matrix is not antisymmetric: max |zeta + zeta^T| = {residual:e}")]
    NotAntisymmetric { residual: f64 },

    #[error("label outside the bounded domain: largest eigenvalue of zeta* zeta is {spectral_norm_sq}")]
    DomainViolation { spectral_norm_sq: f64 },

    #[error("hermitian eigensolver failed to converge")]
    ConvergenceFailure,

    #[error("index ({a}, {b}) out of range for n = {n}")]
    IndexOutOfRange { a: usize, b: usize, n: usize },

    #[error("denominator block C zeta + D is singular")]
    SingularDenominator,

    #[error("block A is singular; UDL decomposition undefined")]
    SingularA,

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("operation requires rank(zeta) = 2, got rank {rank}")]
    RankNotTwo { rank: usize },

    #[error("matrix is zero")]
    ZeroMatrix,

    #[error("zeta has rank 0; no spinor families to extract")]
    ZeroRank,

    #[error("integer overflow computing {what}")]
    Overflow { what: &'static str },

    #[error("shape mismatch: {what}")]
    IncompatibleShape { what: String },

    #[error("observable is not a quadratic form in the spinor variables")]
    UnsupportedObservable,

    #[error("fock basis would need {needed} states, capacity is {capacity} (set COHERENT_MAX_DIM to raise)")]
    CapacityExceeded { needed: u64, capacity: u64 },

    #[error("state construction exceeded the area cutoff j_max = {j_max}")]
    CutoffExceeded { j_max: u32 },

    #[error("boost matrix must have determinant 1, got |det - 1| = {deviation:e}")]
    NonUnitDeterminant { deviation: f64 },

    #[error("failed to parse input: {0}")]
    Parse(String),
}

impl Error {
    /// Stable machine-readable code, used by the CLI error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::NonFinite => "non_finite",
            Error::NotAntisymmetric { .. } => "not_antisymmetric",
            Error::DomainViolation { .. } => "domain_violation",
            Error::ConvergenceFailure => "convergence_failure",
            Error::IndexOutOfRange { .. } => "index_out_of_range",
            Error::SingularDenominator => "singular_denominator",
            Error::SingularA => "singular_a",
            Error::SingularMatrix => "singular_matrix",
            Error::RankNotTwo { .. } => "rank_not_two",
            Error::ZeroMatrix => "zero_matrix",
            Error::ZeroRank => "zero_rank",
            Error::Overflow { .. } => "overflow",
            Error::IncompatibleShape { .. } => "incompatible_shape",
            Error::UnsupportedObservable => "unsupported_observable",
            Error::CapacityExceeded { .. } => "capacity_exceeded",
            Error::CutoffExceeded { .. } => "cutoff_exceeded",
            Error::NonUnitDeterminant { .. } => "non_unit_determinant",
            Error::Parse(_) => "parse_error",
        }
    }
}
