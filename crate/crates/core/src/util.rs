//! Small numeric helpers shared across modules.

/// Compensated (Kahan) accumulator for long floating-point sums.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct KahanSum {
    sum: f64,
    carry: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum
    }
}

pub(crate) fn kahan_sum<I: IntoIterator<Item = f64>>(items: I) -> f64 {
    let mut acc = KahanSum::new();
    for x in items {
        acc.add(x);
    }
    acc.value()
}

/// Streaming log-sum-exp: rescales on the fly so no term underflows.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl LogSumExp {
    pub fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            scaled: 0.0,
        }
    }

    #[inline]
    pub fn add(&mut self, term: f64) {
        if term == f64::NEG_INFINITY {
            return;
        }
        if term <= self.max {
            self.scaled += (term - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - term).exp() + 1.0;
            self.max = term;
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

/// Sample mean and unbiased (m-1 denominator) variance, two-pass.
///
/// The same estimator backs the Gaussian approximation, the Silverman
/// bandwidth and the moments of empirical distributions, which is what makes
/// the LogS/DSS identity exact. Caller guarantees `xs.len() >= 2`.
pub(crate) fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    debug_assert!(xs.len() >= 2);
    let m = xs.len() as f64;
    let mean = kahan_sum(xs.iter().copied()) / m;
    let ss = kahan_sum(xs.iter().map(|&x| (x - mean) * (x - mean)));
    (mean, ss / (m - 1.0))
}
