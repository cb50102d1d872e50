//! Replicated convergence and thinning studies: sample DGP chains, fit the
//! four estimators on growing prefixes, measure divergences to the known
//! invariant law, and summarize percentiles across replicates.
//!
//! Replicates are independent work units; each derives its own seed from
//! (study seed, replicate index), so outputs are identical for any worker
//! count. Within a replicate, smaller sample sizes reuse a prefix of the
//! same chain, which keeps comparisons across m free of chain noise.

use crate::dgp::{invariant_cdf, sample_chain, DgpChain, DgpParams};
use crate::distributions::PredictiveDistribution;
use crate::divergences::divergence;
use crate::error::{Error, Result, Status};
use crate::estimators::{fit_ecdf, fit_ga, fit_kd, fit_mp, BandwidthRule, EstimatorKind};
use crate::rng::RngStream;
use crate::scoring::{QuadratureSettings, ScoringRule};
use rayon::prelude::*;

/// Declarative description of a convergence study.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dgp: DgpParams,
    /// Ascending MCMC sample sizes; each uses a prefix of the replicate's
    /// chain.
    pub m_grid: Vec<usize>,
    /// Number of replicates K.
    pub replicates: usize,
    pub estimators: Vec<EstimatorKind>,
    pub rules: Vec<ScoringRule>,
    pub seed: u64,
    pub burn_in: usize,
    pub quad: QuadratureSettings,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidParam {
                name: "replicates",
                value: 0.0,
            });
        }
        if self.m_grid.is_empty() || self.m_grid[0] == 0 {
            return Err(Error::InvalidParam {
                name: "m_grid",
                value: 0.0,
            });
        }
        if !self.m_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidParam {
                name: "m_grid",
                value: f64::NAN,
            });
        }
        if self.estimators.is_empty() {
            return Err(Error::InvalidParam {
                name: "estimators",
                value: 0.0,
            });
        }
        if self.rules.is_empty() {
            return Err(Error::InvalidParam {
                name: "rules",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// The three sampling strategies of the thinning comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThinningStrategy {
    /// Short chain, no thinning.
    S1,
    /// Short chain retained by thinning a factor-times-longer chain.
    S2,
    /// Long chain, no thinning.
    S3,
}

impl ThinningStrategy {
    pub const ALL: [ThinningStrategy; 3] = [
        ThinningStrategy::S1,
        ThinningStrategy::S2,
        ThinningStrategy::S3,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ThinningStrategy::S1 => "s1",
            ThinningStrategy::S2 => "s2",
            ThinningStrategy::S3 => "s3",
        }
    }
}

impl std::fmt::Display for ThinningStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Thinning study: the base sizes come from `base.m_grid`; strategy S2
/// thins a `factor`-times-longer chain down to the base size.
#[derive(Debug, Clone)]
pub struct ThinningConfig {
    pub base: ExperimentConfig,
    pub factor: usize,
    pub strategies: Vec<ThinningStrategy>,
}

impl ThinningConfig {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.factor == 0 {
            return Err(Error::InvalidParam {
                name: "factor",
                value: 0.0,
            });
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidParam {
                name: "strategies",
                value: 0.0,
            });
        }
        Ok(())
    }
}

/// One (replicate, estimator, rule, m) divergence measurement. The raw
/// divergence is retained even when slightly negative from quadrature
/// noise; summaries clamp at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceRecord {
    pub replicate: usize,
    pub estimator: EstimatorKind,
    pub rule: ScoringRule,
    pub m: usize,
    pub strategy: Option<ThinningStrategy>,
    pub divergence: Option<f64>,
    pub status: Status,
}

fn estimator_index(e: EstimatorKind) -> usize {
    EstimatorKind::ALL.iter().position(|&x| x == e).unwrap()
}

fn rule_index(r: ScoringRule) -> usize {
    ScoringRule::ALL.iter().position(|&x| x == r).unwrap()
}

fn strategy_index(s: Option<ThinningStrategy>) -> usize {
    match s {
        None => 0,
        Some(s) => 1 + ThinningStrategy::ALL.iter().position(|&x| x == s).unwrap(),
    }
}

fn sort_key(r: &DivergenceRecord) -> (usize, usize, usize, usize, usize) {
    (
        r.replicate,
        strategy_index(r.strategy),
        r.m,
        estimator_index(r.estimator),
        rule_index(r.rule),
    )
}

/// Fits one estimator on a chain and measures its divergence from `f0`.
fn measure(
    est: EstimatorKind,
    rule: ScoringRule,
    chain: &DgpChain,
    f0: &PredictiveDistribution,
    quad: &QuadratureSettings,
) -> (Option<f64>, Status) {
    if est == EstimatorKind::Ecdf && rule == ScoringRule::LogS {
        // no density: the (ECDF, LogS) cell is structurally empty
        return (None, Status::SkippedNoDensity);
    }
    let fitted: std::result::Result<PredictiveDistribution, Error> = match est {
        EstimatorKind::Mp => {
            let comps: Vec<(f64, f64)> = chain
                .theta_sq()
                .iter()
                .map(|&t2| (0.0, t2.sqrt()))
                .collect();
            fit_mp(&comps).map(Into::into)
        }
        EstimatorKind::Ecdf => fit_ecdf(chain.x()).map(Into::into),
        EstimatorKind::Kd => fit_kd(chain.x(), BandwidthRule::Silverman).map(Into::into),
        EstimatorKind::Ga => fit_ga(chain.x()).map(Into::into),
    };
    let fitted = match fitted {
        Ok(f) => f,
        Err(e) => return (None, Status::Failed(e)),
    };
    match divergence(rule, &fitted, f0, quad) {
        Ok(d) => (Some(d.value), Status::Ok),
        Err(e) => (None, Status::Failed(e)),
    }
}

/// Runs the convergence study; records come back in canonical order.
pub fn run_convergence_study(cfg: &ExperimentConfig) -> Result<Vec<DivergenceRecord>> {
    cfg.validate()?;
    let f0: PredictiveDistribution = invariant_cdf(&cfg.dgp).into();
    let m_max = *cfg.m_grid.last().unwrap();

    let mut records: Vec<DivergenceRecord> = (0..cfg.replicates)
        .into_par_iter()
        .flat_map_iter(|k| {
            let seed = RngStream::child_seed(cfg.seed, &[k as u64]);
            let chain = sample_chain(&cfg.dgp, m_max, cfg.burn_in, seed);
            let mut out = Vec::new();
            for &m in &cfg.m_grid {
                let prefix = chain.prefix(m);
                for &est in &cfg.estimators {
                    for &rule in &cfg.rules {
                        let (divergence, status) = measure(est, rule, &prefix, &f0, &cfg.quad);
                        out.push(DivergenceRecord {
                            replicate: k,
                            estimator: est,
                            rule,
                            m,
                            strategy: None,
                            divergence,
                            status,
                        });
                    }
                }
            }
            out
        })
        .collect();
    records.sort_by_key(sort_key);
    Ok(records)
}

/// Runs the thinning comparison. Within a replicate all strategies share
/// one long chain: S1 is its prefix, S2 thins it, S3 uses all of it.
pub fn run_thinning_study(cfg: &ThinningConfig) -> Result<Vec<DivergenceRecord>> {
    cfg.validate()?;
    let base = &cfg.base;
    let f0: PredictiveDistribution = invariant_cdf(&base.dgp).into();
    let m_base_max = *base.m_grid.last().unwrap();
    let long_len = cfg.factor * m_base_max;

    let mut records: Vec<DivergenceRecord> = (0..base.replicates)
        .into_par_iter()
        .flat_map_iter(|k| {
            let seed = RngStream::child_seed(base.seed, &[k as u64]);
            let long = sample_chain(&base.dgp, long_len, base.burn_in, seed);
            let mut out = Vec::new();
            for &m in &base.m_grid {
                for &strategy in &cfg.strategies {
                    let (chain, m_eff) = match strategy {
                        ThinningStrategy::S1 => (long.prefix(m), m),
                        ThinningStrategy::S2 => (
                            long.prefix(cfg.factor * m)
                                .thin(cfg.factor)
                                .expect("factor*m >= factor"),
                            m,
                        ),
                        ThinningStrategy::S3 => (long.prefix(cfg.factor * m), cfg.factor * m),
                    };
                    for &est in &base.estimators {
                        for &rule in &base.rules {
                            let (divergence, status) = measure(est, rule, &chain, &f0, &base.quad);
                            out.push(DivergenceRecord {
                                replicate: k,
                                estimator: est,
                                rule,
                                m: m_eff,
                                strategy: Some(strategy),
                                divergence,
                                status,
                            });
                        }
                    }
                }
            }
            out
        })
        .collect();
    records.sort_by_key(sort_key);
    Ok(records)
}

/// Type-7 (linear interpolation) empirical quantile of a sorted slice.
pub fn quantile_type7(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    assert!((0.0..=1.0).contains(&p));
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Quantile summary of one (estimator, rule, m, strategy) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub estimator: EstimatorKind,
    pub rule: ScoringRule,
    pub m: usize,
    pub strategy: Option<ThinningStrategy>,
    /// One value per requested probability, on divergences clamped at 0.
    pub quantiles: Vec<f64>,
    pub n_ok: usize,
    pub n_failed: usize,
}

/// Groups records and computes type-7 quantiles at `probs` (clamping the
/// raw divergences at zero first). Rows come back in canonical order.
pub fn summarize(records: &[DivergenceRecord], probs: &[f64]) -> Vec<SummaryRow> {
    use std::collections::BTreeMap;
    // key: (strategy index, m, estimator index, rule index)
    type CellKey = (usize, usize, usize, usize);
    let mut groups: BTreeMap<CellKey, (Vec<f64>, usize)> = BTreeMap::new();
    for r in records {
        let key = (
            strategy_index(r.strategy),
            r.m,
            estimator_index(r.estimator),
            rule_index(r.rule),
        );
        let entry = groups.entry(key).or_default();
        match r.divergence {
            Some(d) => entry.0.push(d.max(0.0)),
            None => entry.1 += 1,
        }
    }
    groups
        .into_iter()
        .map(|((si, m, ei, ri), (mut vals, n_failed))| {
            vals.sort_unstable_by(|a, b| a.total_cmp(b));
            let quantiles = if vals.is_empty() {
                vec![f64::NAN; probs.len()]
            } else {
                probs.iter().map(|&p| quantile_type7(&vals, p)).collect()
            };
            SummaryRow {
                estimator: EstimatorKind::ALL[ei],
                rule: ScoringRule::ALL[ri],
                m,
                strategy: if si == 0 {
                    None
                } else {
                    Some(ThinningStrategy::ALL[si - 1])
                },
                quantiles,
                n_ok: vals.len(),
                n_failed,
            }
        })
        .collect()
}

/// Convenience: the p-quantile of a named cell in a summary table.
pub fn summary_quantile(
    rows: &[SummaryRow],
    estimator: EstimatorKind,
    rule: ScoringRule,
    m: usize,
    strategy: Option<ThinningStrategy>,
    prob_index: usize,
) -> Option<f64> {
    rows.iter()
        .find(|r| r.estimator == estimator && r.rule == rule && r.m == m && r.strategy == strategy)
        .map(|r| r.quantiles[prob_index])
}

fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Records CSV: `replicate,estimator,rule,m,strategy,divergence,status`.
pub fn write_records_csv<W: std::io::Write>(
    records: &[DivergenceRecord],
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "replicate,estimator,rule,m,strategy,divergence,status")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.replicate,
            r.estimator,
            r.rule,
            r.m,
            r.strategy.map(|s| s.name()).unwrap_or(""),
            r.divergence.map(fmt_f64).unwrap_or_default(),
            r.status.token()
        )?;
    }
    Ok(())
}

/// Summary CSV: `estimator,rule,m,strategy,q10,q50,q90,n_ok,n_failed`
/// (column names follow the requested probabilities).
pub fn write_summary_csv<W: std::io::Write>(
    rows: &[SummaryRow],
    probs: &[f64],
    mut w: W,
) -> std::io::Result<()> {
    let names: Vec<String> = probs
        .iter()
        .map(|p| format!("q{:02}", (p * 100.0).round() as u32))
        .collect();
    writeln!(
        w,
        "estimator,rule,m,strategy,{},n_ok,n_failed",
        names.join(",")
    )?;
    for r in rows {
        let qs: Vec<String> = r.quantiles.iter().map(|&q| fmt_f64(q)).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.estimator,
            r.rule,
            r.m,
            r.strategy.map(|s| s.name()).unwrap_or(""),
            qs.join(","),
            r.n_ok,
            r.n_failed
        )?;
    }
    Ok(())
}

/// Default probabilities for summaries: 10th, 50th and 90th percentiles.
pub const DEFAULT_PROBS: [f64; 3] = [0.1, 0.5, 0.9];
