//! Predictive distribution families: Gaussian, location-scale Student t,
//! equal-weight Gaussian mixtures, and empirical (sample-based) CDFs.
//!
//! All types validate their parameters at construction and are immutable
//! afterwards, so every operation here is pure and thread-safe. Non-finite
//! inputs are rejected once, at the constructor boundary.

use crate::error::{Error, Result};
use crate::util::{kahan_sum, LogSumExp};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

/// ln(2*pi)
pub const LN_2PI: f64 = 1.8378770664093455;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF.
#[inline]
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Standard normal density.
#[inline]
pub fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() * 0.3989422804014327
}

#[inline]
pub fn norm_log_pdf(z: f64) -> f64 {
    -0.5 * z * z - 0.5 * LN_2PI
}

fn ensure_finite(x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite)
    }
}

fn ensure_scale(x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::NonpositiveScale)
    }
}

/// Gaussian distribution with mean `mu` and standard deviation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianDist {
    mu: f64,
    sigma: f64,
}

impl GaussianDist {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        Ok(GaussianDist {
            mu: ensure_finite(mu)?,
            sigma: ensure_scale(sigma)?,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn cdf(&self, x: f64) -> f64 {
        norm_cdf((x - self.mu) / self.sigma)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mu) / self.sigma;
        norm_log_pdf(z) - self.sigma.ln()
    }

    pub fn moments(&self) -> (f64, f64) {
        (self.mu, self.sigma * self.sigma)
    }
}

/// Location-scale Student t: `(X - loc) / sqrt(scale_sq)` is standard t
/// with `df` degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudentTDist {
    loc: f64,
    scale_sq: f64,
    df: f64,
}

impl StudentTDist {
    pub fn new(loc: f64, scale_sq: f64, df: f64) -> Result<Self> {
        Ok(StudentTDist {
            loc: ensure_finite(loc)?,
            scale_sq: ensure_scale(scale_sq)?,
            df: ensure_scale(df)?,
        })
    }

    pub fn loc(&self) -> f64 {
        self.loc
    }

    pub fn scale_sq(&self) -> f64 {
        self.scale_sq
    }

    pub fn df(&self) -> f64 {
        self.df
    }

    /// CDF via the regularized incomplete beta function.
    pub fn cdf(&self, x: f64) -> f64 {
        let z = (x - self.loc) / self.scale_sq.sqrt();
        if z == 0.0 {
            return 0.5;
        }
        let w = self.df / (self.df + z * z);
        let half_tail = 0.5 * beta_reg(self.df / 2.0, 0.5, w);
        if z < 0.0 {
            half_tail
        } else {
            1.0 - half_tail
        }
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let c = self.df;
        let z = (x - self.loc) / self.scale_sq.sqrt();
        ln_gamma((c + 1.0) / 2.0)
            - ln_gamma(c / 2.0)
            - 0.5 * (c * std::f64::consts::PI * self.scale_sq).ln()
            - 0.5 * (c + 1.0) * (z * z / c).ln_1p()
    }

    /// Mean and variance; the variance exists only for `df > 2`.
    pub fn moments(&self) -> Result<(f64, f64)> {
        if self.df <= 2.0 {
            return Err(Error::MomentUndefined);
        }
        Ok((self.loc, self.scale_sq * self.df / (self.df - 2.0)))
    }
}

/// Equal-weight mixture of Gaussian components.
///
/// This single type backs both the mixture-of-parameters estimator (scale
/// and location both varying) and the Gaussian-kernel density estimate
/// (common scale equal to the bandwidth).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(components: &[(f64, f64)]) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyDraws);
        }
        let mut mus = Vec::with_capacity(components.len());
        let mut sigmas = Vec::with_capacity(components.len());
        for &(mu, sigma) in components {
            mus.push(ensure_finite(mu)?);
            sigmas.push(ensure_scale(sigma)?);
        }
        Ok(GaussianMixture { mus, sigmas })
    }

    /// Location mixture with one common scale (the KD case).
    pub fn with_common_scale(means: &[f64], sigma: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::EmptyDraws);
        }
        let sigma = ensure_scale(sigma)?;
        let mut mus = Vec::with_capacity(means.len());
        for &mu in means {
            mus.push(ensure_finite(mu)?);
        }
        let sigmas = vec![sigma; mus.len()];
        Ok(GaussianMixture { mus, sigmas })
    }

    pub fn len(&self) -> usize {
        self.mus.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    pub fn means(&self) -> &[f64] {
        &self.mus
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let sum = kahan_sum(
            self.mus
                .iter()
                .zip(&self.sigmas)
                .map(|(&mu, &s)| norm_cdf((x - mu) / s)),
        );
        sum / self.len() as f64
    }

    /// Log-density via streaming log-sum-exp, stable far into the tails.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let mut lse = LogSumExp::new();
        for (&mu, &s) in self.mus.iter().zip(&self.sigmas) {
            lse.add(norm_log_pdf((x - mu) / s) - s.ln());
        }
        lse.value() - (self.len() as f64).ln()
    }

    pub fn moments(&self) -> (f64, f64) {
        let m = self.len() as f64;
        let mean = kahan_sum(self.mus.iter().copied()) / m;
        // avg(sigma_i^2 + mu_i^2) - mean^2, computed in centered form
        let var = kahan_sum(
            self.mus
                .iter()
                .zip(&self.sigmas)
                .map(|(&mu, &s)| s * s + (mu - mean) * (mu - mean)),
        ) / m;
        (mean, var)
    }
}

/// Empirical distribution of a sample; the CDF is the right-continuous step
/// function with jumps 1/m at the (pre-sorted) sample points.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(sample: &[f64]) -> Result<Self> {
        Self::from_vec(sample.to_vec())
    }

    pub fn from_vec(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptyDraws);
        }
        if sample.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        sample.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        Ok(EmpiricalDist { sorted: sample })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    /// The sample, sorted ascending.
    pub fn sample(&self) -> &[f64] {
        &self.sorted
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let below = self.sorted.partition_point(|&v| v <= x);
        below as f64 / self.len() as f64
    }

    /// Sample mean and unbiased variance; needs at least two points.
    pub fn moments(&self) -> Result<(f64, f64)> {
        if self.len() < 2 {
            return Err(Error::MomentUndefined);
        }
        Ok(crate::util::mean_and_var(&self.sorted))
    }
}

/// Tagged union over the four families; the object every scoring rule
/// consumes.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictiveDistribution {
    Gaussian(GaussianDist),
    StudentT(StudentTDist),
    Mixture(GaussianMixture),
    Empirical(EmpiricalDist),
}

impl From<GaussianDist> for PredictiveDistribution {
    fn from(d: GaussianDist) -> Self {
        PredictiveDistribution::Gaussian(d)
    }
}

impl From<StudentTDist> for PredictiveDistribution {
    fn from(d: StudentTDist) -> Self {
        PredictiveDistribution::StudentT(d)
    }
}

impl From<GaussianMixture> for PredictiveDistribution {
    fn from(d: GaussianMixture) -> Self {
        PredictiveDistribution::Mixture(d)
    }
}

impl From<EmpiricalDist> for PredictiveDistribution {
    fn from(d: EmpiricalDist) -> Self {
        PredictiveDistribution::Empirical(d)
    }
}

impl PredictiveDistribution {
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            PredictiveDistribution::Gaussian(d) => d.cdf(x),
            PredictiveDistribution::StudentT(d) => d.cdf(x),
            PredictiveDistribution::Mixture(d) => d.cdf(x),
            PredictiveDistribution::Empirical(d) => d.cdf(x),
        }
    }

    /// Density at `x`; empirical distributions have none.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        Ok(self.log_pdf(x)?.exp())
    }

    pub fn log_pdf(&self, x: f64) -> Result<f64> {
        match self {
            PredictiveDistribution::Gaussian(d) => Ok(d.log_pdf(x)),
            PredictiveDistribution::StudentT(d) => Ok(d.log_pdf(x)),
            PredictiveDistribution::Mixture(d) => Ok(d.log_pdf(x)),
            PredictiveDistribution::Empirical(_) => Err(Error::NoDensity),
        }
    }

    /// Mean and variance when both exist.
    pub fn moments(&self) -> Result<(f64, f64)> {
        match self {
            PredictiveDistribution::Gaussian(d) => Ok(d.moments()),
            PredictiveDistribution::StudentT(d) => d.moments(),
            PredictiveDistribution::Mixture(d) => Ok(d.moments()),
            PredictiveDistribution::Empirical(d) => d.moments(),
        }
    }

    /// Mean alone; defined more broadly than `moments` (Student t only
    /// needs df > 1, a single-point sample has a mean).
    pub fn mean(&self) -> Result<f64> {
        match self {
            PredictiveDistribution::Gaussian(d) => Ok(d.mu()),
            PredictiveDistribution::StudentT(d) => {
                if d.df() > 1.0 {
                    Ok(d.loc())
                } else {
                    Err(Error::MomentUndefined)
                }
            }
            PredictiveDistribution::Mixture(d) => Ok(d.moments().0),
            PredictiveDistribution::Empirical(d) => {
                Ok(kahan_sum(d.sample().iter().copied()) / d.len() as f64)
            }
        }
    }

    /// Rough dispersion scale used to seed tail scans and integration
    /// splits; falls back to the raw scale parameter when the variance
    /// does not exist.
    pub(crate) fn scale_hint(&self) -> f64 {
        match self {
            PredictiveDistribution::Gaussian(d) => d.sigma(),
            PredictiveDistribution::StudentT(d) => d
                .moments()
                .map(|(_, v)| v.sqrt())
                .unwrap_or_else(|_| d.scale_sq().sqrt()),
            PredictiveDistribution::Mixture(d) => d.moments().1.sqrt(),
            PredictiveDistribution::Empirical(d) => d
                .moments()
                .map(|(_, v)| v.sqrt().max(f64::MIN_POSITIVE))
                .unwrap_or(1.0),
        }
    }

    /// Jump locations of the CDF (empty for the continuous families).
    pub(crate) fn jumps(&self) -> &[f64] {
        match self {
            PredictiveDistribution::Empirical(d) => d.sample(),
            _ => &[],
        }
    }

    /// A central location, defined for every variant (unlike `mean`).
    pub(crate) fn location_hint(&self) -> f64 {
        match self {
            PredictiveDistribution::Gaussian(d) => d.mu(),
            PredictiveDistribution::StudentT(d) => d.loc(),
            PredictiveDistribution::Mixture(d) => d.moments().0,
            PredictiveDistribution::Empirical(d) => d.sample()[d.len() / 2],
        }
    }

    /// Initial integration cuts marking where the distribution has mass,
    /// so adaptive panels start out seeing its structure. Empirical
    /// distributions are covered by their jump points instead.
    pub(crate) fn structure_cuts(&self) -> Vec<f64> {
        if matches!(self, PredictiveDistribution::Empirical(_)) {
            return Vec::new();
        }
        let center = self.location_hint();
        let scale = self.scale_hint().max(f64::MIN_POSITIVE);
        [
            -8.0, -6.0, -4.0, -3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0,
        ]
        .iter()
        .map(|k| center + k * scale)
        .collect()
    }
}
