//! Command-line front end: simulation, scoring, convergence/thinning
//! studies, and the Markov-switching AR evaluation pipeline. Every command
//! is deterministic given (config, seed) and writes a manifest next to its
//! data outputs.

mod config;
mod manifest;

use clap::{Parser, Subcommand};
use postpred::dgp::sample_chain;
use postpred::distributions::{
    EmpiricalDist, GaussianDist, GaussianMixture, PredictiveDistribution,
};
use postpred::estimators::{fit_kd, BandwidthRule};
use postpred::experiments::{
    run_convergence_study, run_thinning_study, summarize, write_records_csv, write_summary_csv,
    DEFAULT_PROBS,
};
use postpred::msar::{evaluate_forecasts, write_forecast_records_csv, write_mean_scores_csv};
use postpred::scoring::{score_with, ScoreOptions};
use postpred::ScoringRule;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Default worker-count environment variable.
const WORKERS_ENV: &str = "POSTPRED_WORKERS";

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments (exit 2).
    Config(String),
    /// Filesystem trouble (exit 3).
    Io(String),
    /// The requested computation is undefined for the inputs (exit 4).
    Domain(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Domain(m) => write!(f, "domain error: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Domain(_) => 4,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "postpred",
    version,
    about = "Posterior predictive approximation and proper-score evaluation",
    after_help = "Exit codes: 0 ok, 2 config error, 3 I/O error, 4 domain error.\n\
                  POSTPRED_WORKERS sets the default worker count."
)]
struct Cli {
    /// Override the seed given in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: POSTPRED_WORKERS, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory for data files and the manifest.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a DGP chain and write it as CSV.
    #[command(after_help = "Config keys:\n  \
        [dgp] alpha (|alpha| < 1), s (> 0), n (> 0)\n  \
        [simulate] m, seed, burn_in (default 100)")]
    Simulate {
        /// TOML config with [dgp] and [simulate] sections.
        config: PathBuf,
    },

    /// Score observations under a predictive distribution, CSV to stdout.
    #[command(after_help = "Distribution specs:\n  \
        gaussian <mu> <sigma>   closed-form Gaussian\n  \
        mixture <file>          equal-weight mixture, lines `mu,sigma`\n  \
        sample <file>           empirical CDF of the sampled values\n  \
        kd <file>               Gaussian-kernel density fit of the values\n\
        Observation files hold one value per line; `#` starts a comment.")]
    Score {
        /// Scoring rule: crps, logs or dss.
        rule: String,
        /// Distribution spec (see --help).
        #[arg(num_args = 1..=3)]
        dist: Vec<String>,
        /// File with one observation per line.
        #[arg(long)]
        obs: PathBuf,
        /// Evaluate mixture CRPS by numeric integration instead of the
        /// exact formula.
        #[arg(long)]
        numeric: bool,
    },

    /// Run the replicated convergence study.
    #[command(after_help = "Config keys:\n  \
        [dgp] alpha, s, n\n  \
        [study] m_grid (ascending), replicates, seed,\n          \
        estimators (default [mp,ecdf,kd,ga]), rules (default [crps,logs,dss]),\n          \
        burn_in (default 100)")]
    Convergence {
        /// TOML config with [dgp] and [study] sections.
        config: PathBuf,
    },

    /// Run the thinning-strategy comparison (S1/S2/S3).
    #[command(after_help = "Config keys: as `convergence`, plus\n  \
        [thinning] factor (default 10), strategies (default [s1,s2,s3])")]
    Thinning {
        /// TOML config with [dgp], [study] and optional [thinning] sections.
        config: PathBuf,
    },

    /// Evaluate MS-AR(1) forecasts over expanding windows.
    #[command(after_help = "Config keys:\n  \
        [msar] chains, n_burn, n_keep, m_grid (ascending, <= n_keep), seed,\n         \
        n_origins (one-step origins taken from the end of the series),\n         \
        estimators, rules (defaults as in `convergence`)\n  \
        [priors] mean_beta, var_beta, s_bar, nu_bar, dirichlet\n           \
        (default: zero mean, 25*I, 0.3, 3, [[8,2],[2,8]])\n\
        The series file is CSV with a `date,value` header.")]
    Msar {
        /// Series CSV with columns date,value.
        series: PathBuf,
        /// TOML config with [msar] and optional [priors] sections.
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("postpred: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let pool = build_pool(cli.workers)?;
    let out = cli.out.clone();
    match cli.command {
        Command::Simulate { config } => cmd_simulate(&config, &out, cli.seed),
        Command::Score {
            rule,
            dist,
            obs,
            numeric,
        } => cmd_score(&rule, &dist, &obs, numeric),
        Command::Convergence { config } => {
            pool.install(|| cmd_convergence(&config, &out, cli.seed))
        }
        Command::Thinning { config } => pool.install(|| cmd_thinning(&config, &out, cli.seed)),
        Command::Msar { series, config } => {
            pool.install(|| cmd_msar(&series, &config, &out, cli.seed))
        }
    }
}

fn build_pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let n = match workers {
        Some(n) => n,
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => v.parse().map_err(|_| {
                CliError::Config(format!("invalid {WORKERS_ENV}: `{v}` is not a count"))
            })?,
            Err(_) => 0, // rayon default: all cores
        },
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))
}

/// Writes via a temp file in the same directory, then renames into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out")
    ));
    std::fs::write(&tmp, bytes).map_err(|e| CliError::Io(format!("{}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn ensure_out_dir(out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))
}

fn read_config_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn parse_rule(name: &str) -> Result<ScoringRule, CliError> {
    match name {
        "crps" => Ok(ScoringRule::Crps),
        "logs" => Ok(ScoringRule::LogS),
        "dss" => Ok(ScoringRule::Dss),
        other => Err(CliError::Config(format!(
            "invalid rule `{other}` (expected crps|logs|dss)"
        ))),
    }
}

/// One float per line; blank lines and `#` comments are skipped.
fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            CliError::Config(format!(
                "{}:{}: `{line}` is not a number",
                path.display(),
                lineno + 1
            ))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no observations found",
            path.display()
        )));
    }
    Ok(values)
}

/// Lines of `mu,sigma`; a literal `mu,sigma` header and `#` comments are
/// skipped.
fn read_mixture(path: &Path) -> Result<Vec<(f64, f64)>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut comps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "mu,sigma" {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |part: Option<&str>| -> Result<f64, CliError> {
            part.and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected `mu,sigma`, got `{line}`",
                    path.display(),
                    lineno + 1
                ))
            })
        };
        let mu = parse(parts.next())?;
        let sigma = parse(parts.next())?;
        comps.push((mu, sigma));
    }
    if comps.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no mixture components found",
            path.display()
        )));
    }
    Ok(comps)
}

/// CSV with a header containing a `value` column (`date` is carried along
/// but unused).
fn read_series(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let value_ix = headers
        .iter()
        .position(|h| h.trim() == "value")
        .ok_or_else(|| {
            CliError::Config(format!("{}: no `value` column in header", path.display()))
        })?;
    let mut values = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let raw = record.get(value_ix).unwrap_or("");
        let v: f64 = raw.trim().parse().map_err(|_| {
            CliError::Config(format!(
                "{}: row {}: `{raw}` is not a number",
                path.display(),
                i + 2
            ))
        })?;
        values.push(v);
    }
    if values.is_empty() {
        return Err(CliError::Config(format!(
            "{}: series is empty",
            path.display()
        )));
    }
    Ok(values)
}

fn build_dist(spec: &[String]) -> Result<PredictiveDistribution, CliError> {
    let domain = |e: postpred::Error| CliError::Domain(e.to_string());
    match spec {
        [kind, mu, sigma] if kind == "gaussian" => {
            let mu: f64 = mu
                .parse()
                .map_err(|_| CliError::Config(format!("gaussian mu `{mu}` is not a number")))?;
            let sigma: f64 = sigma.parse().map_err(|_| {
                CliError::Config(format!("gaussian sigma `{sigma}` is not a number"))
            })?;
            Ok(GaussianDist::new(mu, sigma).map_err(domain)?.into())
        }
        [kind, file] if kind == "mixture" => {
            let comps = read_mixture(Path::new(file))?;
            Ok(GaussianMixture::new(&comps).map_err(domain)?.into())
        }
        [kind, file] if kind == "sample" => {
            let values = read_values(Path::new(file))?;
            Ok(EmpiricalDist::new(&values).map_err(domain)?.into())
        }
        [kind, file] if kind == "kd" => {
            let values = read_values(Path::new(file))?;
            Ok(fit_kd(&values, BandwidthRule::Silverman)
                .map_err(domain)?
                .into())
        }
        other => Err(CliError::Config(format!(
            "invalid distribution spec `{}` (see --help)",
            other.join(" ")
        ))),
    }
}

fn cmd_simulate(
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let started = manifest::now_rfc3339();
    let text = read_config_text(config_path)?;
    let cfg: config::SimulateConfig = config::load(config_path)?;
    let params = cfg.validate()?;
    let seed = seed_override.unwrap_or(cfg.simulate.seed);

    ensure_out_dir(out)?;
    let chain = sample_chain(&params, cfg.simulate.m, cfg.simulate.burn_in, seed);
    let mut buf = Vec::new();
    chain
        .write_csv(&mut buf)
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("chain.csv"), &buf)?;

    manifest::RunManifest {
        command: "simulate".into(),
        config_path: Some(config_path.display().to_string()),
        config_digest: Some(config::config_digest(&text)?),
        seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started,
        finished: manifest::now_rfc3339(),
        outputs: vec!["chain.csv".into()],
    }
    .write(out)
}

fn cmd_score(rule: &str, dist: &[String], obs: &Path, numeric: bool) -> Result<(), CliError> {
    let rule = parse_rule(rule)?;
    let dist = build_dist(dist)?;
    let ys = read_values(obs)?;
    let opts = ScoreOptions {
        mixture_numeric: numeric,
        ..Default::default()
    };

    let mut out = String::new();
    writeln!(out, "index,y,score").unwrap();
    let mut total = 0.0;
    for (i, &y) in ys.iter().enumerate() {
        let s = score_with(rule, &dist, y, &opts)
            .map_err(|e| CliError::Domain(format!("observation {i} (y = {y}): {e}")))?;
        writeln!(out, "{},{:.16e},{:.16e}", i, y, s).unwrap();
        total += s;
    }
    writeln!(out, "mean,,{:.16e}", total / ys.len() as f64).unwrap();
    print!("{out}");
    Ok(())
}

fn cmd_convergence(
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let started = manifest::now_rfc3339();
    let text = read_config_text(config_path)?;
    let cfg: config::StudyConfig = config::load(config_path)?;
    let experiment = cfg.build_experiment(seed_override)?;

    let records =
        run_convergence_study(&experiment).map_err(|e| CliError::Domain(e.to_string()))?;
    let rows = summarize(&records, &DEFAULT_PROBS);

    ensure_out_dir(out)?;
    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("records.csv"), &buf)?;
    let mut buf = Vec::new();
    write_summary_csv(&rows, &DEFAULT_PROBS, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("summary.csv"), &buf)?;

    manifest::RunManifest {
        command: "convergence".into(),
        config_path: Some(config_path.display().to_string()),
        config_digest: Some(config::config_digest(&text)?),
        seed: experiment.seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started,
        finished: manifest::now_rfc3339(),
        outputs: vec!["records.csv".into(), "summary.csv".into()],
    }
    .write(out)
}

fn cmd_thinning(
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let started = manifest::now_rfc3339();
    let text = read_config_text(config_path)?;
    let cfg: config::StudyConfig = config::load(config_path)?;
    let thinning = cfg.build_thinning(seed_override)?;

    let records = run_thinning_study(&thinning).map_err(|e| CliError::Domain(e.to_string()))?;
    let rows = summarize(&records, &DEFAULT_PROBS);

    ensure_out_dir(out)?;
    let mut buf = Vec::new();
    write_records_csv(&records, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("records.csv"), &buf)?;
    let mut buf = Vec::new();
    write_summary_csv(&rows, &DEFAULT_PROBS, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("summary.csv"), &buf)?;

    manifest::RunManifest {
        command: "thinning".into(),
        config_path: Some(config_path.display().to_string()),
        config_digest: Some(config::config_digest(&text)?),
        seed: thinning.base.seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started,
        finished: manifest::now_rfc3339(),
        outputs: vec!["records.csv".into(), "summary.csv".into()],
    }
    .write(out)
}

fn cmd_msar(
    series_path: &Path,
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
) -> Result<(), CliError> {
    let started = manifest::now_rfc3339();
    let series = read_series(series_path)?;
    let text = read_config_text(config_path)?;
    let cfg: config::MsarConfig = config::load(config_path)?;
    let priors = cfg.priors()?;
    let eval_cfg = cfg.eval_config(seed_override)?;
    let estimators = cfg.estimators()?;
    let rules = cfg.rules()?;

    let n = series.len();
    if cfg.msar.n_origins + 1 > n {
        return Err(CliError::Config(format!(
            "msar.n_origins = {} needs a series longer than {}",
            cfg.msar.n_origins, n
        )));
    }
    let origins: Vec<usize> = ((n - 1 - cfg.msar.n_origins)..(n - 1)).collect();

    let eval = evaluate_forecasts(&series, &priors, &eval_cfg, &estimators, &rules, &origins)
        .map_err(|e| CliError::Domain(e.to_string()))?;

    ensure_out_dir(out)?;
    let mut buf = Vec::new();
    write_forecast_records_csv(&eval.records, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("scores.csv"), &buf)?;
    let mut buf = Vec::new();
    write_mean_scores_csv(&eval.means, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    write_atomic(&out.join("mean_scores.csv"), &buf)?;

    manifest::RunManifest {
        command: "msar".into(),
        config_path: Some(config_path.display().to_string()),
        config_digest: Some(config::config_digest(&text)?),
        seed: eval_cfg.seed,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started,
        finished: manifest::now_rfc3339(),
        outputs: vec!["scores.csv".into(), "mean_scores.csv".into()],
    }
    .write(out)
}
