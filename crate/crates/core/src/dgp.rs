//! Data-generating process for the simulation study: a first-order
//! dependent chain (theta_i^2) of conditional variances built from inverse
//! Gamma innovations, with observations X_i ~ N(0, theta_i^2). The invariant
//! law of X is a location-scale Student t that is known in closed form, so
//! divergences of fitted approximations can be measured exactly.

use crate::distributions::StudentTDist;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Hyper-parameters of the process: persistence `alpha` in (-1, 1), the
/// unconditional mean `s` of theta^2, and the tail-control parameter `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgpParams {
    alpha: f64,
    s: f64,
    n: f64,
}

impl DgpParams {
    pub fn new(alpha: f64, s: f64, n: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha.abs() < 1.0) {
            return Err(Error::InvalidParam {
                name: "alpha",
                value: alpha,
            });
        }
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParam {
                name: "s",
                value: s,
            });
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidParam {
                name: "n",
                value: n,
            });
        }
        Ok(DgpParams { alpha, s, n })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn n(&self) -> f64 {
        self.n
    }
}

/// Default number of initial draws discarded to wash out the fixed
/// theta_0^2 = s start.
pub const DEFAULT_BURN_IN: usize = 100;

/// One simulated chain: the variance path, the observation path, and the
/// parameters and seed that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpChain {
    theta_sq: Vec<f64>,
    x: Vec<f64>,
    params: DgpParams,
    seed: u64,
}

impl DgpChain {
    pub fn theta_sq(&self) -> &[f64] {
        &self.theta_sq
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn params(&self) -> &DgpParams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.theta_sq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_sq.is_empty()
    }

    /// Per-draw conditional standard deviations theta_i, the mixture
    /// components of the MP estimator under this model.
    pub fn theta(&self) -> Vec<f64> {
        self.theta_sq.iter().map(|&t| t.sqrt()).collect()
    }

    /// Keeps every `tau`-th draw, starting at index tau-1.
    pub fn thin(&self, tau: usize) -> Result<DgpChain> {
        if tau == 0 {
            return Err(Error::InvalidParam {
                name: "tau",
                value: 0.0,
            });
        }
        if self.len() < tau {
            return Err(Error::TooFewDraws {
                needed: tau,
                got: self.len(),
            });
        }
        let pick =
            |v: &[f64]| -> Vec<f64> { v.iter().skip(tau - 1).step_by(tau).copied().collect() };
        Ok(DgpChain {
            theta_sq: pick(&self.theta_sq),
            x: pick(&self.x),
            params: self.params,
            seed: self.seed,
        })
    }

    /// First `m` retained draws; panics if `m` exceeds the chain length.
    pub fn prefix(&self, m: usize) -> DgpChain {
        assert!(m <= self.len());
        DgpChain {
            theta_sq: self.theta_sq[..m].to_vec(),
            x: self.x[..m].to_vec(),
            params: self.params,
            seed: self.seed,
        }
    }

    /// Writes the chain as CSV with columns `i,theta_sq,x` (1-based index).
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "i,theta_sq,x")?;
        for (i, (t, x)) in self.theta_sq.iter().zip(&self.x).enumerate() {
            writeln!(w, "{},{:.16e},{:.16e}", i + 1, t, x)?;
        }
        Ok(())
    }
}

/// The invariant law of X: T(0, n s / (n + 2), n + 2).
pub fn invariant_cdf(p: &DgpParams) -> StudentTDist {
    StudentTDist::new(0.0, p.n * p.s / (p.n + 2.0), p.n + 2.0)
        .expect("valid params imply a valid invariant law")
}

/// Average autoregressive coefficient of the variance chain,
/// (n alpha^2 + 1) / (n + 1).
pub fn persistence(p: &DgpParams) -> f64 {
    (p.n * p.alpha * p.alpha + 1.0) / (p.n + 1.0)
}

/// Simulates `m` post-burn-in draws of (theta_i^2, X_i), deterministically
/// in the seed. The recursion starts at theta_0^2 = s.
pub fn sample_chain(p: &DgpParams, m: usize, burn_in: usize, seed: u64) -> DgpChain {
    assert!(m > 0);
    let mut rng = RngStream::new(seed, &[]);
    let shape = (p.n + 3.0) / 2.0;
    let rate = p.n * p.s * (1.0 - p.alpha * p.alpha) / 2.0;
    let ns = p.n * p.s;

    let mut theta_sq = Vec::with_capacity(m);
    let mut x = Vec::with_capacity(m);
    let mut prev = p.s;
    for i in 0..(burn_in + m) {
        let psi = rng.inverse_gamma(shape, rate);
        let upsilon = rng.normal(p.alpha, (psi / ns).sqrt());
        let t2 = psi + upsilon * upsilon * prev;
        let xi = rng.normal(0.0, t2.sqrt());
        prev = t2;
        if i >= burn_in {
            theta_sq.push(t2);
            x.push(xi);
        }
    }
    DgpChain {
        theta_sq,
        x,
        params: *p,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn invariant_law_examples() {
        let p = DgpParams::new(0.5, 2.0, 12.0).unwrap();
        let t = invariant_cdf(&p);
        assert_eq!(t.loc(), 0.0);
        assert_abs_diff_eq!(t.scale_sq(), 12.0 / 7.0, epsilon = 1e-15);
        assert_eq!(t.df(), 14.0);

        let p = DgpParams::new(0.1, 2.0, 20.0).unwrap();
        let t = invariant_cdf(&p);
        assert_abs_diff_eq!(t.scale_sq(), 40.0 / 22.0, epsilon = 1e-15);
        assert_eq!(t.df(), 22.0);

        // variance of the invariant law is s exactly
        let (_, var) = t.moments().unwrap();
        assert_abs_diff_eq!(var, 2.0, epsilon = 1e-14);
    }

    #[test]
    fn persistence_examples() {
        let p = DgpParams::new(0.5, 2.0, 12.0).unwrap();
        assert_abs_diff_eq!(persistence(&p), 4.0 / 13.0, epsilon = 1e-15);

        let p = DgpParams::new(0.0, 2.0, 12.0).unwrap();
        assert_abs_diff_eq!(persistence(&p), 1.0 / 13.0, epsilon = 1e-15);

        let p = DgpParams::new(0.9, 2.0, 12.0).unwrap();
        assert_abs_diff_eq!(persistence(&p), 0.82461538461538462, epsilon = 1e-15);
    }

    #[test]
    fn param_validation() {
        assert!(matches!(
            DgpParams::new(1.5, 2.0, 12.0).unwrap_err(),
            Error::InvalidParam { name: "alpha", .. }
        ));
        assert!(DgpParams::new(-0.99, 2.0, 12.0).is_ok());
        assert!(DgpParams::new(0.5, 0.0, 12.0).is_err());
        assert!(DgpParams::new(0.5, 2.0, -1.0).is_err());
    }

    #[test]
    fn chains_are_deterministic() {
        let p = DgpParams::new(0.5, 2.0, 12.0).unwrap();
        let a = sample_chain(&p, 5, 10, 99);
        let b = sample_chain(&p, 5, 10, 99);
        assert_eq!(a, b);
        let c = sample_chain(&p, 5, 10, 100);
        assert_ne!(a, c);
    }

    #[test]
    fn longer_chain_extends_shorter_one() {
        let p = DgpParams::new(0.9, 2.0, 12.0).unwrap();
        let short = sample_chain(&p, 50, 100, 7);
        let long = sample_chain(&p, 500, 100, 7);
        assert_eq!(short.theta_sq(), &long.theta_sq()[..50]);
        assert_eq!(short.x(), &long.x()[..50]);
        assert_eq!(long.prefix(50), short);
    }

    #[test]
    fn thin_examples() {
        let p = DgpParams::new(0.5, 2.0, 12.0).unwrap();
        let chain = sample_chain(&p, 10, 0, 1);
        let same = chain.thin(1).unwrap();
        assert_eq!(same, chain);

        let fifth = chain.thin(5).unwrap();
        assert_eq!(fifth.len(), 2);
        assert_eq!(fifth.x()[0], chain.x()[4]);
        assert_eq!(fifth.x()[1], chain.x()[9]);

        assert_eq!(
            chain.thin(11).unwrap_err(),
            Error::TooFewDraws {
                needed: 11,
                got: 10
            }
        );

        let trimmed = sample_chain(&p, 40_000, 0, 1).thin(10).unwrap();
        assert_eq!(trimmed.len(), 4_000);
    }

    #[test]
    fn theta_sq_positive_and_moments_near_targets() {
        let p = DgpParams::new(0.5, 2.0, 12.0).unwrap();
        let chain = sample_chain(&p, 1_000_000, 100, 42);
        assert!(chain.theta_sq().iter().all(|&t| t > 0.0));

        let mean_t2: f64 = chain.theta_sq().iter().sum::<f64>() / chain.len() as f64;
        assert!((mean_t2 - 2.0).abs() < 0.02 * 2.0, "mean theta^2 {mean_t2}");

        let mean_x: f64 = chain.x().iter().sum::<f64>() / chain.len() as f64;
        let var_x: f64 = chain
            .x()
            .iter()
            .map(|&x| (x - mean_x) * (x - mean_x))
            .sum::<f64>()
            / chain.len() as f64;
        assert!((var_x - 2.0).abs() < 0.02 * 2.0, "var x {var_x}");
    }

    #[test]
    fn lag_one_autocorrelation_increases_with_alpha() {
        let acf1 = |alpha: f64| {
            let p = DgpParams::new(alpha, 2.0, 12.0).unwrap();
            let chain = sample_chain(&p, 200_000, 100, 17);
            let t2 = chain.theta_sq();
            let mean: f64 = t2.iter().sum::<f64>() / t2.len() as f64;
            let var: f64 = t2.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>();
            let cov: f64 = t2
                .windows(2)
                .map(|w| (w[0] - mean) * (w[1] - mean))
                .sum::<f64>();
            cov / var
        };
        let (a1, a5, a9) = (acf1(0.1), acf1(0.5), acf1(0.9));
        assert!(a1 < a5 && a5 < a9, "acf ordering: {a1} {a5} {a9}");
    }

    #[test]
    fn csv_round_trip_shape() {
        let p = DgpParams::new(0.5, 2.0, 12.0).unwrap();
        let chain = sample_chain(&p, 3, 0, 5);
        let mut buf = Vec::new();
        chain.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "i,theta_sq,x");
        assert!(lines[1].starts_with("1,"));
        // values parse back to the same doubles
        let field: f64 = lines[1].split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(field, chain.theta_sq()[0]);
    }
}
