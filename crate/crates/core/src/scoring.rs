//! Proper scoring rules for every (rule, distribution-family) pair in use:
//! exact CRPS paths for Gaussians, Gaussian mixtures and empirical CDFs, a
//! numeric CRPS path by adaptive quadrature, the logarithmic score, and the
//! Dawid-Sebastiani score.

use crate::distributions::{
    norm_cdf, norm_pdf, EmpiricalDist, GaussianMixture, PredictiveDistribution,
};
use crate::error::{Error, Result};
use crate::quad::integrate_real_line;
use crate::util::{kahan_sum, KahanSum};

/// The three scoring rules under study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScoringRule {
    Crps,
    LogS,
    Dss,
}

impl ScoringRule {
    pub const ALL: [ScoringRule; 3] = [ScoringRule::Crps, ScoringRule::LogS, ScoringRule::Dss];

    pub fn name(&self) -> &'static str {
        match self {
            ScoringRule::Crps => "crps",
            ScoringRule::LogS => "logs",
            ScoringRule::Dss => "dss",
        }
    }
}

impl std::fmt::Display for ScoringRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Tolerances for the numeric CRPS and divergence integrals. The defaults
/// mirror the 1e-6 rel/abs tolerance used throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        QuadratureSettings {
            rel_tol: 1e-6,
            abs_tol: 1e-6,
            max_subdivisions: 512,
        }
    }
}

impl QuadratureSettings {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        if !(rel_tol > 0.0) {
            return Err(Error::InvalidParam {
                name: "rel_tol",
                value: rel_tol,
            });
        }
        if !(abs_tol > 0.0) {
            return Err(Error::InvalidParam {
                name: "abs_tol",
                value: abs_tol,
            });
        }
        if max_subdivisions == 0 {
            return Err(Error::InvalidParam {
                name: "max_subdivisions",
                value: 0.0,
            });
        }
        Ok(QuadratureSettings {
            rel_tol,
            abs_tol,
            max_subdivisions,
        })
    }
}

/// E|Z| for Z ~ Normal(mu, sigma2):
/// A(mu, s2) = 2 sigma phi(mu/sigma) + mu (2 Phi(mu/sigma) - 1),
/// with the degenerate limit A(mu, 0) = |mu|.
#[inline]
pub fn aux_a(mu: f64, sigma2: f64) -> f64 {
    if sigma2 < 1e-300 {
        return mu.abs();
    }
    let sigma = sigma2.sqrt();
    let z = mu / sigma;
    2.0 * sigma * norm_pdf(z) + mu * (2.0 * norm_cdf(z) - 1.0)
}

/// Closed-form CRPS of a single Gaussian.
#[inline]
pub fn crps_gaussian(mu: f64, sigma: f64, y: f64) -> f64 {
    aux_a(y - mu, sigma * sigma) - 0.5 * aux_a(0.0, 2.0 * sigma * sigma)
}

/// Exact CRPS of an equal-weight Gaussian mixture, O(m^2):
/// (1/m) sum A(y - mu_i, s_i^2) - (1/2m^2) sum sum A(mu_i - mu_j, s_i^2 + s_j^2).
pub fn crps_mixture_exact(mix: &GaussianMixture, y: f64) -> f64 {
    let mus = mix.means();
    let sigmas = mix.sigmas();
    let m = mix.len();
    let mf = m as f64;

    let first = kahan_sum(mus.iter().zip(sigmas).map(|(&mu, &s)| aux_a(y - mu, s * s))) / mf;

    // A is even in its first argument, so the cross terms are symmetric.
    let mut cross = KahanSum::new();
    for i in 0..m {
        cross.add(aux_a(0.0, 2.0 * sigmas[i] * sigmas[i]));
        let mut row = KahanSum::new();
        for j in (i + 1)..m {
            row.add(aux_a(
                mus[i] - mus[j],
                sigmas[i] * sigmas[i] + sigmas[j] * sigmas[j],
            ));
        }
        cross.add(2.0 * row.value());
    }
    first - cross.value() / (2.0 * mf * mf)
}

/// CRPS by adaptive quadrature of the integral definition, split at the
/// observation so each side is smooth.
pub fn crps_numeric(dist: &PredictiveDistribution, y: f64, q: &QuadratureSettings) -> Result<f64> {
    dist.mean()?; // finite mean required for the integral to exist
    let mut cuts = dist.structure_cuts();
    cuts.extend_from_slice(dist.jumps());
    cuts.sort_unstable_by(|a, b| a.total_cmp(b));
    let below: Vec<f64> = cuts.iter().copied().filter(|&x| x < y).collect();
    let above: Vec<f64> = cuts.iter().copied().filter(|&x| x > y).collect();

    let f_left = |z: f64| {
        let c = dist.cdf(z);
        c * c
    };
    let left = integrate_real_line(
        &f_left,
        f64::NEG_INFINITY,
        y,
        &below,
        q.abs_tol / 2.0,
        q.rel_tol,
        q.max_subdivisions,
    )?;

    let f_right = |z: f64| {
        let c = 1.0 - dist.cdf(z);
        c * c
    };
    let right = integrate_real_line(
        &f_right,
        y,
        f64::INFINITY,
        &above,
        q.abs_tol / 2.0,
        q.rel_tol,
        q.max_subdivisions,
    )?;
    Ok(left + right)
}

/// CRPS of an empirical CDF through the order-statistic representation,
/// O(m) on the pre-sorted sample:
/// (2/m^2) sum (X_(i) - y) (m 1{y < X_(i)} - i + 1/2).
pub fn crps_ecdf(emp: &EmpiricalDist, y: f64) -> f64 {
    let xs = emp.sample();
    let m = xs.len() as f64;
    let mut acc = KahanSum::new();
    for (idx, &x) in xs.iter().enumerate() {
        let i = (idx + 1) as f64;
        let indicator = if y < x { m } else { 0.0 };
        acc.add((x - y) * (indicator - i + 0.5));
    }
    2.0 * acc.value() / (m * m)
}

/// CRPS of an empirical CDF through the kernel representation, O(m^2):
/// (1/m) sum |X_i - y| - (1/2m^2) sum sum |X_i - X_j|.
///
/// Algebraically equal to `crps_ecdf`; kept as the quadratic-cost oracle.
pub fn crps_ecdf_kernel(sample: &[f64], y: f64) -> f64 {
    assert!(!sample.is_empty());
    let m = sample.len() as f64;
    let first = kahan_sum(sample.iter().map(|&x| (x - y).abs())) / m;
    let mut cross = KahanSum::new();
    for i in 0..sample.len() {
        let mut row = KahanSum::new();
        for j in (i + 1)..sample.len() {
            row.add((sample[i] - sample[j]).abs());
        }
        cross.add(2.0 * row.value());
    }
    first - cross.value() / (2.0 * m * m)
}

/// Logarithmic score -log f(y).
///
/// Computed in log space, so a score is returned whenever the log-density
/// is finite; `DensityUnderflow` signals an observation so deep in the tail
/// that even the log-density is not representable.
pub fn logs(dist: &PredictiveDistribution, y: f64) -> Result<f64> {
    let lp = dist.log_pdf(y)?;
    if lp.is_finite() {
        Ok(-lp)
    } else {
        Err(Error::DensityUnderflow)
    }
}

/// Dawid-Sebastiani score log var_F + (y - mu_F)^2 / var_F.
pub fn dss(dist: &PredictiveDistribution, y: f64) -> Result<f64> {
    let (mean, var) = dist.moments()?;
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(var.ln() + (y - mean) * (y - mean) / var)
}

/// Options for `score_with`; `score` uses the defaults (exact mixture CRPS).
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreOptions {
    /// Evaluate CRPS of Gaussian mixtures by quadrature instead of the
    /// exact O(m^2) formula.
    pub mixture_numeric: bool,
    pub quad: QuadratureSettings,
}

/// Scores `dist` against observation `y`, dispatching to the cheapest exact
/// path available for the family.
pub fn score(rule: ScoringRule, dist: &PredictiveDistribution, y: f64) -> Result<f64> {
    score_with(rule, dist, y, &ScoreOptions::default())
}

pub fn score_with(
    rule: ScoringRule,
    dist: &PredictiveDistribution,
    y: f64,
    opts: &ScoreOptions,
) -> Result<f64> {
    match rule {
        ScoringRule::Crps => match dist {
            PredictiveDistribution::Gaussian(g) => Ok(crps_gaussian(g.mu(), g.sigma(), y)),
            PredictiveDistribution::Mixture(m) => {
                if opts.mixture_numeric {
                    crps_numeric(dist, y, &opts.quad)
                } else {
                    Ok(crps_mixture_exact(m, y))
                }
            }
            PredictiveDistribution::StudentT(_) => crps_numeric(dist, y, &opts.quad),
            PredictiveDistribution::Empirical(e) => Ok(crps_ecdf(e, y)),
        },
        ScoringRule::LogS => logs(dist, y),
        ScoringRule::Dss => dss(dist, y),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{GaussianDist, StudentTDist, LN_2PI};
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    // mpmath/quadrature oracles, frozen (see repository notes)
    const CRPS_STD_NORMAL_AT_0: f64 = 0.23369497725510907;
    const AUX_A_1_1: f64 = 1.1666309411753726;
    const V_STAR: f64 = 0.35940887857148834; // mixture {(-1,1),(1,1)} at y=0
    const T_STAR: f64 = 0.31615105326430614; // T(0, 12/7, 14) at y=0

    #[test]
    fn aux_a_examples() {
        assert_abs_diff_eq!(aux_a(0.0, 1.0), 0.79788456080286536, epsilon = 1e-15);
        assert_eq!(aux_a(1.0, 0.0), 1.0);
        assert_abs_diff_eq!(aux_a(1.0, 1.0), AUX_A_1_1, epsilon = 1e-15);
    }

    #[test]
    fn crps_gaussian_examples() {
        assert_abs_diff_eq!(
            crps_gaussian(0.0, 1.0, 0.0),
            CRPS_STD_NORMAL_AT_0,
            epsilon = 1e-15
        );
        // translation invariance
        assert_abs_diff_eq!(
            crps_gaussian(5.0, 1.0, 5.0),
            CRPS_STD_NORMAL_AT_0,
            epsilon = 1e-15
        );
        // linear scaling in sigma at the mode
        assert_abs_diff_eq!(
            crps_gaussian(0.0, 2.0, 0.0),
            2.0 * CRPS_STD_NORMAL_AT_0,
            epsilon = 1e-15
        );
        // minimized at y = mu
        assert!(crps_gaussian(0.0, 1.0, 0.4) > crps_gaussian(0.0, 1.0, 0.0));
    }

    #[test]
    fn mixture_exact_examples() {
        let single = GaussianMixture::new(&[(0.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(
            crps_mixture_exact(&single, 0.0),
            CRPS_STD_NORMAL_AT_0,
            epsilon = 1e-14
        );

        let dup = GaussianMixture::new(&[(0.0, 1.0), (0.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(
            crps_mixture_exact(&dup, 0.0),
            CRPS_STD_NORMAL_AT_0,
            epsilon = 1e-14
        );

        let two = GaussianMixture::new(&[(-1.0, 1.0), (1.0, 1.0)]).unwrap();
        assert_abs_diff_eq!(crps_mixture_exact(&two, 0.0), V_STAR, epsilon = 1e-8);
    }

    #[test]
    fn crps_numeric_matches_exact_paths() {
        let q = QuadratureSettings::default();
        let g: PredictiveDistribution = GaussianDist::new(0.0, 1.0).unwrap().into();
        let v = crps_numeric(&g, 0.0, &q).unwrap();
        assert_abs_diff_eq!(v, CRPS_STD_NORMAL_AT_0, epsilon = 1e-6);

        let t: PredictiveDistribution = StudentTDist::new(0.0, 12.0 / 7.0, 14.0).unwrap().into();
        let tight = QuadratureSettings::new(1e-10, 1e-10, 2000).unwrap();
        let v = crps_numeric(&t, 0.0, &tight).unwrap();
        assert_abs_diff_eq!(v, T_STAR, epsilon = 1e-9);
    }

    #[test]
    fn crps_numeric_on_empirical_steps() {
        // step CDFs integrate exactly once panels align with the jumps
        let e: PredictiveDistribution = EmpiricalDist::new(&[1.0, 2.0]).unwrap().into();
        let q = QuadratureSettings::default();
        assert_abs_diff_eq!(crps_numeric(&e, 1.5, &q).unwrap(), 0.25, epsilon = 1e-9);
    }

    #[test]
    fn crps_ecdf_examples() {
        let e = EmpiricalDist::new(&[1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(crps_ecdf(&e, 1.5), 0.25, epsilon = 1e-15);

        let point = EmpiricalDist::new(&[0.0]).unwrap();
        assert_abs_diff_eq!(crps_ecdf(&point, 1.0), 1.0, epsilon = 1e-15);
        assert_eq!(crps_ecdf(&point, 0.0), 0.0);
    }

    #[test]
    fn kernel_representation_examples() {
        assert_abs_diff_eq!(crps_ecdf_kernel(&[1.0, 2.0], 1.5), 0.25, epsilon = 1e-15);
        assert_eq!(crps_ecdf_kernel(&[0.0, 0.0, 0.0], 0.0), 0.0);
        assert_abs_diff_eq!(crps_ecdf_kernel(&[-1.0, 1.0], 0.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn order_statistic_and_kernel_paths_agree() {
        let mut rng = RngStream::new(21, &[0]);
        for rep in 0..40 {
            let m = 1 + (rng.next_u64() % 200) as usize;
            let sample: Vec<f64> = (0..m).map(|_| rng.normal(0.0, 3.0)).collect();
            let y = rng.normal(0.0, 3.0);
            let emp = EmpiricalDist::new(&sample).unwrap();
            let a = crps_ecdf(&emp, y);
            let b = crps_ecdf_kernel(&sample, y);
            let rel = (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
            assert!(rel <= 1e-9, "rep {rep}: rel diff {rel}");
        }
    }

    #[test]
    fn logs_examples() {
        let g: PredictiveDistribution = GaussianDist::new(0.0, 1.0).unwrap().into();
        assert_abs_diff_eq!(logs(&g, 0.0).unwrap(), 0.91893853320467274, epsilon = 1e-15);
        assert_abs_diff_eq!(
            logs(&g, 2.0).unwrap(),
            0.91893853320467274 + 2.0,
            epsilon = 1e-14
        );

        let mix: PredictiveDistribution = GaussianMixture::new(&[(-1.0, 1.0), (1.0, 1.0)])
            .unwrap()
            .into();
        assert_abs_diff_eq!(
            logs(&mix, 0.0).unwrap(),
            1.4189385332046727,
            epsilon = 1e-14
        );

        let e: PredictiveDistribution = EmpiricalDist::new(&[0.0]).unwrap().into();
        assert_eq!(logs(&e, 0.0).unwrap_err(), Error::NoDensity);
    }

    #[test]
    fn logs_underflow_is_typed() {
        let g: PredictiveDistribution = GaussianDist::new(0.0, 1.0).unwrap().into();
        // z^2 overflows: the log-density itself is -inf
        assert_eq!(logs(&g, 1e200).unwrap_err(), Error::DensityUnderflow);
        // a merely extreme observation still yields a finite score
        assert!(logs(&g, 1e8).unwrap().is_finite());
    }

    #[test]
    fn dss_examples() {
        let g: PredictiveDistribution = GaussianDist::new(0.0, 1.0).unwrap().into();
        assert_eq!(dss(&g, 0.0).unwrap(), 0.0);
        assert_eq!(dss(&g, 2.0).unwrap(), 4.0);

        let e: PredictiveDistribution = EmpiricalDist::new(&[0.0, 0.0]).unwrap().into();
        assert_eq!(dss(&e, 1.0).unwrap_err(), Error::ZeroVariance);
    }

    #[test]
    fn score_dispatch_examples() {
        let e: PredictiveDistribution = EmpiricalDist::new(&[1.0, 2.0]).unwrap().into();
        assert_abs_diff_eq!(
            score(ScoringRule::Crps, &e, 1.5).unwrap(),
            0.25,
            epsilon = 1e-15
        );
        assert_eq!(
            score(ScoringRule::LogS, &e, 1.5).unwrap_err(),
            Error::NoDensity
        );

        let g: PredictiveDistribution = GaussianDist::new(0.0, 1.0).unwrap().into();
        assert_eq!(score(ScoringRule::Dss, &g, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn exact_and_numeric_mixture_crps_agree() {
        let mut rng = RngStream::new(33, &[1]);
        let q = QuadratureSettings::default();
        for _ in 0..10 {
            let m = 1 + (rng.next_u64() % 50) as usize;
            let comps: Vec<(f64, f64)> = (0..m)
                .map(|_| (rng.normal(0.0, 2.0), 0.1 + rng.uniform() * 2.0))
                .collect();
            let mix = GaussianMixture::new(&comps).unwrap();
            let y = rng.normal(0.0, 2.0);
            let exact = crps_mixture_exact(&mix, y);
            let numeric = crps_numeric(&mix.clone().into(), y, &q).unwrap();
            assert!(
                (exact - numeric).abs() <= 1e-6,
                "diff {}",
                (exact - numeric).abs()
            );
        }
    }

    #[test]
    fn ga_logs_equals_scaled_ecdf_dss() {
        // LogS(GA) = (log 2pi + DSS(ECDF)) / 2 when moments are shared
        let mut rng = RngStream::new(44, &[0]);
        for _ in 0..100 {
            let m = 2 + (rng.next_u64() % 100) as usize;
            let sample: Vec<f64> = (0..m).map(|_| rng.normal(1.0, 2.5)).collect();
            let y = rng.normal(1.0, 2.5);
            let ga: PredictiveDistribution = crate::estimators::fit_ga(&sample).unwrap().into();
            let ec: PredictiveDistribution = crate::estimators::fit_ecdf(&sample).unwrap().into();
            let lhs = logs(&ga, y).unwrap();
            let rhs = 0.5 * (LN_2PI + dss(&ec, y).unwrap());
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    proptest! {
        // CRPS is translation invariant for every family.
        #[test]
        fn crps_translation_invariance(
            c in -8.0..8.0f64,
            y in -3.0..3.0f64,
            mu in -2.0..2.0f64,
            sigma in 0.2..2.0f64,
        ) {
            let base: PredictiveDistribution = GaussianDist::new(mu, sigma).unwrap().into();
            let shifted: PredictiveDistribution = GaussianDist::new(mu + c, sigma).unwrap().into();
            let a = score(ScoringRule::Crps, &base, y).unwrap();
            let b = score(ScoringRule::Crps, &shifted, y + c).unwrap();
            prop_assert!((a - b).abs() < 1e-10);

            let mix: PredictiveDistribution =
                GaussianMixture::new(&[(mu, sigma), (mu - 1.0, 2.0 * sigma)]).unwrap().into();
            let mix_s: PredictiveDistribution =
                GaussianMixture::new(&[(mu + c, sigma), (mu - 1.0 + c, 2.0 * sigma)]).unwrap().into();
            let a = score(ScoringRule::Crps, &mix, y).unwrap();
            let b = score(ScoringRule::Crps, &mix_s, y + c).unwrap();
            prop_assert!((a - b).abs() < 1e-10);

            let emp: PredictiveDistribution =
                EmpiricalDist::new(&[mu, mu + 1.0, mu - 0.5]).unwrap().into();
            let emp_s: PredictiveDistribution =
                EmpiricalDist::new(&[mu + c, mu + 1.0 + c, mu - 0.5 + c]).unwrap().into();
            let a = score(ScoringRule::Crps, &emp, y).unwrap();
            let b = score(ScoringRule::Crps, &emp_s, y + c).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }

        #[test]
        fn student_t_crps_translation_invariance(c in -5.0..5.0f64, y in -2.0..2.0f64) {
            let base: PredictiveDistribution =
                StudentTDist::new(0.0, 12.0 / 7.0, 14.0).unwrap().into();
            let shifted: PredictiveDistribution =
                StudentTDist::new(c, 12.0 / 7.0, 14.0).unwrap().into();
            let a = score(ScoringRule::Crps, &base, y).unwrap();
            let b = score(ScoringRule::Crps, &shifted, y + c).unwrap();
            prop_assert!((a - b).abs() < 1e-10);
        }
    }
}
