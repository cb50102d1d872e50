//! The four approximation methods that turn MCMC output into a
//! `PredictiveDistribution`: mixture-of-parameters, empirical CDF, Gaussian
//! kernel density with the Silverman bandwidth, and a Gaussian moment fit.
//!
//! All sample-based fits share one moment estimator (mean and m-1 variance),
//! which is what makes LogS of the Gaussian fit an affine function of DSS of
//! the empirical fit.

use crate::distributions::{EmpiricalDist, GaussianDist, GaussianMixture};
use crate::error::{Error, Result};
use crate::util::mean_and_var;

/// Identifies one of the four approximation methods in experiment tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    Mp,
    Ecdf,
    Kd,
    Ga,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Mp,
        EstimatorKind::Ecdf,
        EstimatorKind::Kd,
        EstimatorKind::Ga,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Mp => "mp",
            EstimatorKind::Ecdf => "ecdf",
            EstimatorKind::Kd => "kd",
            EstimatorKind::Ga => "ga",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Bandwidth selection rules for the kernel density estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BandwidthRule {
    Silverman,
}

/// Mixture-of-parameters estimator: the equal-weight mixture of the
/// per-draw Gaussian conditionals `(mu_i, sigma_i)`, order preserved.
pub fn fit_mp(draws: &[(f64, f64)]) -> Result<GaussianMixture> {
    GaussianMixture::new(draws)
}

/// Empirical CDF of the sample.
pub fn fit_ecdf(sample: &[f64]) -> Result<EmpiricalDist> {
    EmpiricalDist::new(sample)
}

/// Silverman plug-in bandwidth h = ((4/3) sigma_hat^5 / m)^(1/5).
pub fn silverman_bandwidth(sample: &[f64]) -> Result<f64> {
    if sample.len() < 2 {
        return Err(Error::TooFewDraws {
            needed: 2,
            got: sample.len(),
        });
    }
    let (_, var) = mean_and_var(sample);
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(silverman_bandwidth_from(var.sqrt(), sample.len()))
}

/// The bandwidth formula itself, for a given sample standard deviation.
pub fn silverman_bandwidth_from(sigma_hat: f64, m: usize) -> f64 {
    ((4.0 / 3.0) * sigma_hat.powi(5) / m as f64).powf(0.2)
}

/// Gaussian-kernel density estimate: a location mixture with means at the
/// sample points and the Silverman bandwidth as common scale. Its variance
/// is the sample variance inflated by the squared bandwidth.
pub fn fit_kd(sample: &[f64], rule: BandwidthRule) -> Result<GaussianMixture> {
    let h = match rule {
        BandwidthRule::Silverman => silverman_bandwidth(sample)?,
    };
    GaussianMixture::with_common_scale(sample, h)
}

/// Gaussian approximation from the sample mean and standard deviation.
pub fn fit_ga(sample: &[f64]) -> Result<GaussianDist> {
    if sample.len() < 2 {
        return Err(Error::TooFewDraws {
            needed: 2,
            got: sample.len(),
        });
    }
    if sample.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (mean, var) = mean_and_var(sample);
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    GaussianDist::new(mean, var.sqrt())
}
