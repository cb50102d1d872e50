//! Deterministic, splittable random number streams.
//!
//! Every stream is a ChaCha8 keystream keyed by a SHA-256 digest of the root
//! seed and a path of integer tags, so that (replicate, purpose) pairs get
//! independent streams whose output does not depend on scheduling or worker
//! count. Normal variates use the inverse-CDF method and Gamma variates the
//! Marsaglia–Tsang squeeze, so draws depend only on the keystream and not on
//! the platform's rejection-sampler internals.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A seeded, deterministic random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha8Rng,
}

impl RngStream {
    /// Creates the stream identified by `(seed, path)`.
    pub fn new(seed: u64, path: &[u64]) -> Self {
        RngStream {
            inner: ChaCha8Rng::from_seed(digest(seed, path)),
        }
    }

    /// Derives a child seed for APIs that accept a plain `u64`.
    pub fn child_seed(seed: u64, path: &[u64]) -> u64 {
        let d = digest(seed, path);
        u64::from_le_bytes(d[..8].try_into().unwrap())
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform draw strictly inside (0, 1) with 53-bit resolution.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    #[inline]
    pub fn standard_normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    #[inline]
    pub fn normal(&mut self, mean: f64, sd: f64) -> f64 {
        mean + sd * self.standard_normal()
    }

    /// Gamma(shape, rate) via Marsaglia–Tsang, with the boost for shape < 1.
    pub fn gamma(&mut self, shape: f64, rate: f64) -> f64 {
        debug_assert!(shape > 0.0 && rate > 0.0);
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0, rate);
            let u = self.uniform();
            return g * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.standard_normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v3 = v * v * v;
            let u = self.uniform();
            if u < 1.0 - 0.0331 * x * x * x * x {
                return d * v3 / rate;
            }
            if u.ln() < 0.5 * x * x + d * (1.0 - v3 + v3.ln()) {
                return d * v3 / rate;
            }
        }
    }

    /// Inverse Gamma: `Z ~ IG(shape, rate)` when `1/Z ~ Gamma(shape, rate)`.
    #[inline]
    pub fn inverse_gamma(&mut self, shape: f64, rate: f64) -> f64 {
        1.0 / self.gamma(shape, rate)
    }

    /// Dirichlet draw by normalizing independent Gamma(alpha_i, 1) variates.
    pub fn dirichlet(&mut self, concentration: &[f64]) -> Vec<f64> {
        debug_assert!(!concentration.is_empty());
        let g: Vec<f64> = concentration.iter().map(|&a| self.gamma(a, 1.0)).collect();
        let total: f64 = g.iter().sum();
        g.into_iter().map(|x| x / total).collect()
    }

    /// Index draw proportional to the given non-negative weights.
    pub fn pick(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let u = self.uniform() * total;
        let mut acc = 0.0;
        for (i, &w) in weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        weights.len() - 1
    }
}

fn digest(seed: u64, path: &[u64]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for p in path {
        h.update(p.to_le_bytes());
    }
    h.finalize().into()
}

/// Inverse standard normal CDF, Wichura's AS 241 (PPND16, double precision).
pub fn inverse_normal_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((r * 2509.0809287301227 + 33430.57558358813) * r + 67265.7709270087) * r
            + 45921.95393154987)
            * r
            + 13731.693765509461)
            * r
            + 1971.5909503065513)
            * r
            + 133.14166789178438)
            * r
            + 3.3871328727963665;
        let den = ((((((r * 5226.4952788525455 + 28729.085735721943) * r + 39307.89580009271)
            * r
            + 21213.794301586597)
            * r
            + 5394.196021424751)
            * r
            + 687.1870074920579)
            * r
            + 42.31333070160091)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let x = if r <= 5.0 {
        let r = r - 1.6;
        let num = ((((((r * 7.745450142783414e-4 + 0.022723844989269184) * r
            + 0.2417807251774506)
            * r
            + 1.2704582524523684)
            * r
            + 3.6478483247632045)
            * r
            + 5.769497221460691)
            * r
            + 4.630337846156546)
            * r
            + 1.4234371107496835;
        let den = ((((((r * 1.0507500716444169e-9 + 5.475938084995345e-4) * r
            + 0.015198666563616457)
            * r
            + 0.14810397642748008)
            * r
            + 0.6897673349851)
            * r
            + 1.6763848301838038)
            * r
            + 2.053191626637759)
            * r
            + 1.0;
        num / den
    } else {
        let r = r - 5.0;
        let num = ((((((r * 2.0103343992922881e-7 + 2.7115555687434876e-5) * r
            + 0.0012426609473880784)
            * r
            + 0.026532189526576124)
            * r
            + 0.29656057182850487)
            * r
            + 1.7848265399172913)
            * r
            + 5.463784911164114)
            * r
            + 6.657904643501103;
        let den = ((((((r * 2.0442631033899397e-15 + 1.421511758316446e-7) * r
            + 1.8463183175100548e-5)
            * r
            + 7.868691311456133e-4)
            * r
            + 0.014875361290850615)
            * r
            + 0.1369298809227358)
            * r
            + 0.599832206555888)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -x
    } else {
        x
    }
}
