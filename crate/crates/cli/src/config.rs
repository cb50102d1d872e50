//! TOML run configurations and their canonical digest.

use postpred::dgp::DgpParams;
use postpred::experiments::{ExperimentConfig, ThinningConfig, ThinningStrategy};
use postpred::msar::{EvalConfig, MsarPriors};
use postpred::{EstimatorKind, QuadratureSettings, ScoringRule};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSection {
    pub alpha: f64,
    pub s: f64,
    pub n: f64,
}

impl DgpSection {
    pub fn build(&self) -> Result<DgpParams, CliError> {
        DgpParams::new(self.alpha, self.s, self.n)
            .map_err(|e| CliError::Config(format!("invalid [dgp]: {e}")))
    }
}

fn default_burn_in() -> usize {
    postpred::dgp::DEFAULT_BURN_IN
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub dgp: DgpSection,
    pub simulate: SimulateSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub m: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    pub seed: u64,
}

impl SimulateConfig {
    pub fn validate(&self) -> Result<DgpParams, CliError> {
        if self.simulate.m == 0 {
            return Err(CliError::Config("invalid simulate.m: must be >= 1".into()));
        }
        self.dgp.build()
    }
}

fn parse_estimators(names: &[String]) -> Result<Vec<EstimatorKind>, CliError> {
    names
        .iter()
        .map(|n| match n.as_str() {
            "mp" => Ok(EstimatorKind::Mp),
            "ecdf" => Ok(EstimatorKind::Ecdf),
            "kd" => Ok(EstimatorKind::Kd),
            "ga" => Ok(EstimatorKind::Ga),
            other => Err(CliError::Config(format!(
                "invalid estimators entry `{other}` (expected mp|ecdf|kd|ga)"
            ))),
        })
        .collect()
}

fn parse_rules(names: &[String]) -> Result<Vec<ScoringRule>, CliError> {
    names
        .iter()
        .map(|n| match n.as_str() {
            "crps" => Ok(ScoringRule::Crps),
            "logs" => Ok(ScoringRule::LogS),
            "dss" => Ok(ScoringRule::Dss),
            other => Err(CliError::Config(format!(
                "invalid rules entry `{other}` (expected crps|logs|dss)"
            ))),
        })
        .collect()
}

fn default_estimator_names() -> Vec<String> {
    vec!["mp".into(), "ecdf".into(), "kd".into(), "ga".into()]
}

fn default_rule_names() -> Vec<String> {
    vec!["crps".into(), "logs".into(), "dss".into()]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub dgp: DgpSection,
    pub study: StudySection,
    #[serde(default)]
    pub thinning: Option<ThinningSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    pub m_grid: Vec<usize>,
    pub replicates: usize,
    #[serde(default = "default_estimator_names")]
    pub estimators: Vec<String>,
    #[serde(default = "default_rule_names")]
    pub rules: Vec<String>,
    pub seed: u64,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
}

fn default_factor() -> usize {
    10
}

fn default_strategies() -> Vec<String> {
    vec!["s1".into(), "s2".into(), "s3".into()]
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinningSection {
    #[serde(default = "default_factor")]
    pub factor: usize,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<String>,
}

impl StudyConfig {
    pub fn build_experiment(
        &self,
        seed_override: Option<u64>,
    ) -> Result<ExperimentConfig, CliError> {
        let cfg = ExperimentConfig {
            dgp: self.dgp.build()?,
            m_grid: self.study.m_grid.clone(),
            replicates: self.study.replicates,
            estimators: parse_estimators(&self.study.estimators)?,
            rules: parse_rules(&self.study.rules)?,
            seed: seed_override.unwrap_or(self.study.seed),
            burn_in: self.study.burn_in,
            quad: QuadratureSettings::default(),
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("invalid [study]: {e}")))?;
        Ok(cfg)
    }

    pub fn build_thinning(&self, seed_override: Option<u64>) -> Result<ThinningConfig, CliError> {
        let section = self.thinning.as_ref();
        let strategies = section
            .map(|s| s.strategies.clone())
            .unwrap_or_else(default_strategies)
            .iter()
            .map(|n| match n.as_str() {
                "s1" => Ok(ThinningStrategy::S1),
                "s2" => Ok(ThinningStrategy::S2),
                "s3" => Ok(ThinningStrategy::S3),
                other => Err(CliError::Config(format!(
                    "invalid strategies entry `{other}` (expected s1|s2|s3)"
                ))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = ThinningConfig {
            base: self.build_experiment(seed_override)?,
            factor: section.map(|s| s.factor).unwrap_or_else(default_factor),
            strategies,
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("invalid [thinning]: {e}")))?;
        Ok(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsarConfig {
    pub msar: MsarSection,
    #[serde(default)]
    pub priors: Option<PriorsSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MsarSection {
    pub chains: usize,
    pub n_burn: usize,
    pub n_keep: usize,
    pub m_grid: Vec<usize>,
    #[serde(default = "default_estimator_names")]
    pub estimators: Vec<String>,
    #[serde(default = "default_rule_names")]
    pub rules: Vec<String>,
    pub seed: u64,
    /// Number of one-step forecast origins, taken from the end of the
    /// series.
    pub n_origins: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorsSection {
    pub mean_beta: [f64; 2],
    pub var_beta: [[f64; 2]; 2],
    pub s_bar: f64,
    pub nu_bar: f64,
    pub dirichlet: [[f64; 2]; 2],
}

impl MsarConfig {
    pub fn priors(&self) -> Result<MsarPriors, CliError> {
        let priors = match &self.priors {
            None => MsarPriors::default(),
            Some(p) => MsarPriors {
                mean_beta: p.mean_beta,
                var_beta: p.var_beta,
                s_bar: p.s_bar,
                nu_bar: p.nu_bar,
                dirichlet_r: p.dirichlet,
            },
        };
        priors
            .validate()
            .map_err(|e| CliError::Config(format!("invalid [priors]: {e}")))?;
        Ok(priors)
    }

    pub fn eval_config(&self, seed_override: Option<u64>) -> Result<EvalConfig, CliError> {
        let cfg = EvalConfig {
            n_chains: self.msar.chains,
            n_burn: self.msar.n_burn,
            n_keep: self.msar.n_keep,
            m_grid: self.msar.m_grid.clone(),
            seed: seed_override.unwrap_or(self.msar.seed),
        };
        cfg.validate()
            .map_err(|e| CliError::Config(format!("invalid [msar]: {e}")))?;
        if self.msar.n_origins == 0 {
            return Err(CliError::Config(
                "invalid msar.n_origins: must be >= 1".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn estimators(&self) -> Result<Vec<EstimatorKind>, CliError> {
        parse_estimators(&self.msar.estimators)
    }

    pub fn rules(&self) -> Result<Vec<ScoringRule>, CliError> {
        parse_rules(&self.msar.rules)
    }
}

pub fn load<T: for<'de> Deserialize<'de>>(path: &std::path::Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// SHA-256 digest of the canonicalized key/value view of a TOML document.
/// Reordering keys or tables leaves the digest unchanged.
pub fn config_digest(text: &str) -> Result<String, CliError> {
    let value: toml::Value =
        toml::from_str(text).map_err(|e| CliError::Config(format!("digest: {e}")))?;
    let mut lines: Vec<String> = Vec::new();
    flatten("", &value, &mut lines);
    lines.sort();
    let mut hasher = Sha256::new();
    for line in &lines {
        hasher.update(line.as_bytes());
        hasher.update(b"\n");
    }
    Ok(format!("sha256:{:x}", hasher.finalize()))
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<String>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, out);
            }
        }
        toml::Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), v, out);
            }
        }
        toml::Value::Float(x) => out.push(format!("{prefix}={:.16e}", x)),
        other => out.push(format!("{prefix}={other}")),
    }
}
