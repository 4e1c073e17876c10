//! The `hfsem` command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad arguments, unreadable or
//! invalid configuration or data), 2 on numerical or assumption failures.

pub mod config;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hfsem_core::estimate::{fit, gof_test, realized_cov, FitResult, GofResult, RealizedCov};
use hfsem_core::montecarlo::{run_study, McConfig, McSummary};
use hfsem_core::simulate::{
    read_observed_csv, simulate_replication, write_paths_csv, ObservedSeries, PathBundle,
};
use hfsem_core::Error;

pub use config::{parse_config, parse_config_str, ConfigError, StudyConfig};

/// Environment variable that overrides `--workers`.
pub const WORKERS_ENV: &str = "HFSEM_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "hfsem", version, about = "SEM with latent diffusions from high-frequency data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Model and study configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master simulation seed; overrides `[mc] seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; results go to standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one replication and write the paths as CSV.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the latent paths.
        #[arg(long)]
        latents: bool,
    },
    /// Estimate θ from simulated or observed data.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Observed-series CSV in the format written by `simulate`.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Estimate θ and run the goodness-of-fit test.
    Test {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
    },
    /// Run the Monte Carlo study described by the configuration.
    Mc {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check identification and regularity assumptions at `[theta]`.
    Check {
        #[command(flatten)]
        common: Common,
    },
}

/// Failure of a subcommand, with the exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Numeric(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidDimension(_)
            | Error::InvalidModel(_)
            | Error::ConfigInconsistency(_)
            | Error::Io(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Usage(format!("i/o error: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load(common: &Common) -> CliResult<StudyConfig> {
    let path = common
        .config
        .as_deref()
        .ok_or_else(|| CliError::Usage("--config is required".into()))?;
    Ok(parse_config(path)?)
}

fn seed(common: &Common, cfg: &StudyConfig) -> u64 {
    common.seed.unwrap_or(cfg.mc.seed)
}

/// Replication 0 of the configured truth under `seed`.
pub fn simulate_once(cfg: &StudyConfig, seed: u64) -> CliResult<PathBundle> {
    let truth = cfg.truth().map_err(CliError::Usage)?;
    Ok(simulate_replication(
        &truth.spec,
        &truth.theta,
        &truth.blocks,
        &cfg.grid,
        cfg.scheme,
        seed,
        0,
    )?)
}

fn read_data(path: &Path) -> CliResult<ObservedSeries> {
    let fail = |e: &dyn std::fmt::Display| CliError::Usage(format!("cannot read data {}: {e}", path.display()));
    let file = File::open(path).map_err(|e| fail(&e))?;
    read_observed_csv(file).map_err(|e| fail(&e))
}

fn realized(cfg: &StudyConfig, common: &Common, data: Option<ObservedSeries>) -> CliResult<RealizedCov> {
    match data {
        Some(obs) => {
            if obs.p1 != cfg.model.spec.p1() || obs.p2 != cfg.model.spec.p2() {
                return Err(CliError::Usage(format!(
                    "data has p1 = {}, p2 = {}; model has p1 = {}, p2 = {}",
                    obs.p1,
                    obs.p2,
                    cfg.model.spec.p1(),
                    cfg.model.spec.p2()
                )));
            }
            Ok(realized_cov(&obs.data, obs.h)?)
        }
        None => {
            let bundle = simulate_once(cfg, seed(common, cfg))?;
            Ok(realized_cov(&bundle.observed(), cfg.grid.h())?)
        }
    }
}

fn sink(out: Option<&Path>, file: &str) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Box::new(BufWriter::new(File::create(dir.join(file))?))
        }
        None => Box::new(std::io::stdout().lock()),
    })
}

fn json(w: &mut dyn Write, value: &impl serde::Serialize) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| CliError::Usage(e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn write_fit(w: &mut dyn Write, res: &FitResult, format: Format) -> CliResult<()> {
    match format {
        Format::Json => json(w, res),
        Format::Csv => {
            writeln!(w, "parameter,estimate,se")?;
            for (k, name) in res.names.iter().enumerate() {
                let se = res.se.as_ref().map(|s| s[k].to_string()).unwrap_or_default();
                writeln!(w, "{name},{},{se}", res.theta_hat[k])?;
            }
            Ok(())
        }
    }
}

fn write_gof(w: &mut dyn Write, g: &GofResult, format: Format) -> CliResult<()> {
    match format {
        Format::Json => json(w, g),
        Format::Csv => {
            writeln!(w, "t_stat,df,p_value,alpha,critical_value,reject")?;
            writeln!(
                w,
                "{},{},{},{},{},{}",
                g.t_stat, g.df, g.p_value, g.alpha, g.critical_value, g.reject
            )?;
            Ok(())
        }
    }
}

fn workers(flag: Option<usize>, cfg: &StudyConfig) -> CliResult<Option<usize>> {
    let from_env = match std::env::var(WORKERS_ENV) {
        Ok(v) => Some(v.trim().parse::<usize>().ok().filter(|&w| w > 0).ok_or_else(|| {
            CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))
        })?),
        Err(_) => None,
    };
    Ok(from_env.or(flag).or(cfg.mc.workers))
}

/// The compact part of a study summary printed by `mc`.
#[derive(serde::Serialize)]
struct McBrief<'a> {
    replications: usize,
    failed_replications: usize,
    t: &'a [hfsem_core::montecarlo::TStats],
    warnings: &'a [String],
}

fn mc_config(
    cfg: &StudyConfig,
    common: &Common,
    reps: Option<usize>,
    alpha: Option<f64>,
    flag_workers: Option<usize>,
) -> CliResult<McConfig> {
    let truth = cfg.truth().map_err(CliError::Usage)?;
    let mc = McConfig {
        replications: reps.unwrap_or(cfg.mc.replications),
        grid: cfg.grid,
        scheme: cfg.scheme,
        true_spec: truth.spec.clone(),
        true_theta: truth.theta.clone(),
        blocks: truth.blocks.clone(),
        fitted: cfg.fitted.clone(),
        alpha: alpha.unwrap_or(cfg.mc.alpha),
        seed: seed(common, cfg),
        workers: workers(flag_workers, cfg)?,
        outputs: common.out.clone(),
    };
    mc.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(mc)
}

fn print_mc(summary: &McSummary, format: Format) -> CliResult<()> {
    let mut w = std::io::stdout().lock();
    match format {
        Format::Json => json(
            &mut w,
            &McBrief {
                replications: summary.replications,
                failed_replications: summary.failed_replications,
                t: &summary.t,
                warnings: &summary.warnings,
            },
        ),
        Format::Csv => {
            writeln!(w, "model,df,n,failed,mean,sd,min,q1,median,q3,max,rejection_rate")?;
            let o = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for t in &summary.t {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    t.model,
                    t.df,
                    t.n,
                    t.failed,
                    o(t.mean),
                    o(t.sd),
                    o(t.min),
                    o(t.q1),
                    o(t.median),
                    o(t.q3),
                    o(t.max),
                    o(t.rejection_rate)
                )?;
            }
            Ok(())
        }
    }
}

/// Executes one parsed command line.
pub fn execute(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate { common, latents } => {
            let cfg = load(&common)?;
            let bundle = simulate_once(&cfg, seed(&common, &cfg))?;
            let mut w = sink(common.out.as_deref(), "paths.csv")?;
            write_paths_csv(&bundle, &mut w, latents)?;
            w.flush()?;
        }
        Command::Fit { common, data } => {
            // Unreadable data is reported before any configuration problem.
            let obs = data.as_deref().map(read_data).transpose()?;
            let cfg = load(&common)?;
            let q = realized(&cfg, &common, obs)?;
            let res = fit(&cfg.model.spec, &q, &cfg.model.fit)?;
            if !res.converged {
                log::warn!("optimizer stopped with projected gradient {:.3e}", res.grad_norm);
            }
            let mut w = sink(common.out.as_deref(), "fit.json")?;
            write_fit(&mut *w, &res, common.format)?;
            w.flush()?;
        }
        Command::Test { common, data, alpha } => {
            // Unreadable data is reported before any configuration problem.
            let obs = data.as_deref().map(read_data).transpose()?;
            let cfg = load(&common)?;
            let q = realized(&cfg, &common, obs)?;
            let res = fit(&cfg.model.spec, &q, &cfg.model.fit)?;
            let g = gof_test(&cfg.model.spec, &res, &q, alpha)?;
            let mut w = sink(common.out.as_deref(), "test.json")?;
            write_gof(&mut *w, &g, common.format)?;
            w.flush()?;
        }
        Command::Mc { common, reps, alpha, workers } => {
            let cfg = load(&common)?;
            let mc = mc_config(&cfg, &common, reps, alpha, workers)?;
            let summary = run_study(&mc)?;
            for warning in &summary.warnings {
                eprintln!("warning: {warning}");
            }
            print_mc(&summary, common.format)?;
        }
        Command::Check { common } => {
            let cfg = load(&common)?;
            let report = cfg
                .identifiability
                .as_ref()
                .ok_or_else(|| CliError::Usage("check needs a [theta] section".into()))?;
            eprintln!("jacobian rank {}/{}", report.jacobian_rank, report.q);
            let mut w = sink(common.out.as_deref(), "check.json")?;
            json(&mut *w, report)?;
            w.flush()?;
            if !report.all_pass() {
                return Err(CliError::Numeric("assumption checks failed".into()));
            }
        }
    }
    Ok(())
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
