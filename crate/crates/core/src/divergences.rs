//! Score divergences d_S(F, G) = S(F, G) - S(G, G): squared CDF distance
//! for the CRPS, Kullback-Leibler for LogS, and the closed moment form for
//! DSS. These are the quantities the consistency experiments track.

use crate::distributions::PredictiveDistribution;
use crate::error::{Error, Result};
use crate::quad::integrate_real_line;
use crate::scoring::{QuadratureSettings, ScoringRule};

/// One computed divergence. `value` is the raw (possibly slightly negative,
/// quadrature-noise) number; reports should use `clamped`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DivergenceValue {
    pub value: f64,
    pub rule: ScoringRule,
    /// Truncation interval actually integrated over (KL only).
    pub truncation: Option<(f64, f64)>,
}

impl DivergenceValue {
    pub fn clamped(&self) -> f64 {
        self.value.max(0.0)
    }
}

/// CRPS divergence: the integral of (F(z) - G(z))^2 over the real line.
/// Step CDFs are handled by aligning integration panels with their jumps.
pub fn div_crps(
    f: &PredictiveDistribution,
    g: &PredictiveDistribution,
    q: &QuadratureSettings,
) -> Result<DivergenceValue> {
    let mf = f.mean()?;
    let mg = g.mean()?;
    let mut breaks: Vec<f64> = Vec::with_capacity(f.jumps().len() + g.jumps().len() + 31);
    breaks.extend_from_slice(f.jumps());
    breaks.extend_from_slice(g.jumps());
    breaks.extend(f.structure_cuts());
    breaks.extend(g.structure_cuts());
    breaks.push(0.5 * (mf + mg));
    breaks.sort_unstable_by(|a, b| a.total_cmp(b));
    breaks.dedup();

    let integrand = |z: f64| {
        let d = f.cdf(z) - g.cdf(z);
        d * d
    };
    let value = integrate_real_line(
        &integrand,
        f64::NEG_INFINITY,
        f64::INFINITY,
        &breaks,
        q.abs_tol,
        q.rel_tol,
        q.max_subdivisions,
    )?;
    Ok(DivergenceValue {
        value,
        rule: ScoringRule::Crps,
        truncation: None,
    })
}

// Log-densities below this are treated as numerically zero when locating
// the truncated support (double exp underflows near -745).
const LOG_FLOOR: f64 = -700.0;

/// Kullback-Leibler divergence of `g` from `f` (the LogS divergence),
/// integrating g log(g/f) over the support where both log-densities are
/// numerically finite.
///
/// The truncation points are found by scanning outward from the mean of `g`
/// on a geometric grid until either log-density drops below the floor.
pub fn div_kl(
    f: &PredictiveDistribution,
    g: &PredictiveDistribution,
    q: &QuadratureSettings,
) -> Result<DivergenceValue> {
    let center = g.mean()?;
    let scale = g.scale_hint().max(f64::MIN_POSITIVE);

    let both_finite =
        |z: f64| -> Result<bool> { Ok(f.log_pdf(z)? > LOG_FLOOR && g.log_pdf(z)? > LOG_FLOOR) };
    if !both_finite(center)? {
        return Err(Error::EmptySupport);
    }

    let scan = |direction: f64| -> Result<f64> {
        let mut last_good = center;
        let mut offset = 1e-3 * scale;
        while offset <= 1e15 * scale {
            let z = center + direction * offset;
            if !both_finite(z)? {
                break;
            }
            last_good = z;
            offset *= 1.1;
        }
        Ok(last_good)
    };
    let lo = scan(-1.0)?;
    let hi = scan(1.0)?;
    if !(hi > lo) {
        return Err(Error::EmptySupport);
    }

    let integrand = |z: f64| {
        let lg = match g.log_pdf(z) {
            Ok(v) => v,
            Err(_) => return 0.0,
        };
        let lf = match f.log_pdf(z) {
            Ok(v) => v,
            Err(_) => return 0.0,
        };
        if lg <= LOG_FLOOR || lf <= LOG_FLOOR {
            return 0.0;
        }
        lg.exp() * (lg - lf)
    };
    let mut cuts = f.structure_cuts();
    cuts.extend(g.structure_cuts());
    cuts.push(center);
    cuts.sort_unstable_by(|a, b| a.total_cmp(b));
    cuts.dedup();
    let value = integrate_real_line(
        &integrand,
        lo,
        hi,
        &cuts,
        q.abs_tol,
        q.rel_tol,
        q.max_subdivisions,
    )?;
    Ok(DivergenceValue {
        value,
        rule: ScoringRule::LogS,
        truncation: Some((lo, hi)),
    })
}

/// DSS divergence in closed form from the first two moments:
/// vG/vF - log(vG/vF) + (mF - mG)^2 / vF - 1.
pub fn div_dss(f: &PredictiveDistribution, g: &PredictiveDistribution) -> Result<DivergenceValue> {
    let (mf, vf) = f.moments()?;
    let (mg, vg) = g.moments()?;
    if vf <= 0.0 || vg <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ratio = vg / vf;
    let value = ratio - ratio.ln() + (mf - mg) * (mf - mg) / vf - 1.0;
    Ok(DivergenceValue {
        value,
        rule: ScoringRule::Dss,
        truncation: None,
    })
}

/// Dispatch on the rule. LogS requires both arguments to carry densities.
pub fn divergence(
    rule: ScoringRule,
    f: &PredictiveDistribution,
    g: &PredictiveDistribution,
    q: &QuadratureSettings,
) -> Result<DivergenceValue> {
    match rule {
        ScoringRule::Crps => div_crps(f, g, q),
        ScoringRule::LogS => div_kl(f, g, q),
        ScoringRule::Dss => div_dss(f, g),
    }
}
