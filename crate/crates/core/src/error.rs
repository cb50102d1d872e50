use thiserror::Error;

/// Error type shared by all modules of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// The distribution has no Lebesgue density (empirical CDFs).
    #[error("distribution has no density")]
    NoDensity,
    /// First or second moment does not exist (e.g. Student t with df <= 2,
    /// or an empirical distribution with fewer than two points).
    #[error("moments are undefined for this distribution")]
    MomentUndefined,
    /// The (sample) variance is exactly zero.
    #[error("variance is zero")]
    ZeroVariance,
    /// An empty draw sequence was supplied.
    #[error("empty draw sequence")]
    EmptyDraws,
    /// Fewer draws than the operation requires.
    #[error("too few draws: need at least {needed}, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    /// A scale parameter was zero, negative, or non-finite.
    #[error("scale parameter must be positive and finite")]
    NonpositiveScale,
    /// A non-finite value (NaN or infinity) was rejected at construction.
    #[error("non-finite value in input")]
    NonFinite,
    /// A named parameter failed validation.
    #[error("invalid parameter `{name}`: {value}")]
    InvalidParam { name: &'static str, value: f64 },
    /// Adaptive quadrature hit its subdivision limit before reaching the
    /// requested tolerance.
    #[error(
        "quadrature failed: error estimate {error_estimate:e} after {subdivisions} subdivisions"
    )]
    QuadratureFailure {
        subdivisions: usize,
        error_estimate: f64,
    },
    /// The log-density is not numerically finite at the observation; the
    /// score would be +inf and callers must decide how to handle it.
    #[error("density underflow at the observation")]
    DensityUnderflow,
    /// The truncated integration region for a divergence is empty.
    #[error("truncated support is empty")]
    EmptySupport,
    /// The conditional posterior precision matrix is not positive definite.
    #[error("posterior precision matrix is not positive definite")]
    SingularPosterior,
    /// All state likelihoods underflowed at some filtering step.
    #[error("state likelihoods underflowed during filtering")]
    NumericalUnderflow,
}

impl Error {
    /// Short stable token used in CSV status columns.
    pub fn slug(&self) -> &'static str {
        match self {
            Error::NoDensity => "no_density",
            Error::MomentUndefined => "moment_undefined",
            Error::ZeroVariance => "zero_variance",
            Error::EmptyDraws => "empty_draws",
            Error::TooFewDraws { .. } => "too_few_draws",
            Error::NonpositiveScale => "nonpositive_scale",
            Error::NonFinite => "non_finite",
            Error::InvalidParam { .. } => "invalid_param",
            Error::QuadratureFailure { .. } => "quadrature_failure",
            Error::DensityUnderflow => "density_underflow",
            Error::EmptySupport => "empty_support",
            Error::SingularPosterior => "singular_posterior",
            Error::NumericalUnderflow => "numerical_underflow",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Outcome of one scored or diverged record in an experiment table.
#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// The (estimator, rule) pair is undefined (LogS needs a density).
    SkippedNoDensity,
    Failed(Error),
}

impl Status {
    pub fn token(&self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::SkippedNoDensity => "skipped_no_density",
            Status::Failed(e) => e.slug(),
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Status::Ok)
    }
}
