use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod analyze;
mod rmse;
mod settings;
mod simulate;
mod verify;

/// PCA for multivariate extremes: analysis, simulation and Monte Carlo checks.
///
/// Every command reads an optional `key = value` config file; flags and
/// `--set key=value` override it. The resolved configuration is written
/// next to the results.
#[derive(Parser)]
#[command(name = "expca", version, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the PCA angular-measure estimator to a CSV data set.
    Analyze(AnalyzeArgs),
    /// Draw a sample from a simulation model and write it as CSV.
    Simulate(SimulateArgs),
    /// RMSE study of the estimators over replicated samples.
    Rmse(RmseArgs),
    /// Run a verification suite; exits 1 if any check fails.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Config file with `key = value` lines.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_key_value)]
    set: Vec<(String, String)>,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Model family: gumbel, dirichlet or dirichlet_rotated.
    #[arg(long)]
    family: Option<String>,
    /// Ambient dimension.
    #[arg(long)]
    d: Option<usize>,
    /// Dimension of the model's extremal subspace.
    #[arg(long)]
    p: Option<usize>,
    /// Tail index.
    #[arg(long)]
    alpha: Option<f64>,
    /// Gumbel dependence parameter.
    #[arg(long)]
    theta: Option<f64>,
    /// Comma-separated Dirichlet parameters.
    #[arg(long, value_name = "A1,A2,..")]
    dirichlet_params: Option<String>,
    /// Scale of the |N(0, sigma^2)| noise.
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Bound on the random rotation angle.
    #[arg(long)]
    rotation_bound: Option<f64>,
}

impl ModelArgs {
    fn push(&self, out: &mut Vec<(String, String)>) {
        push(out, "model.family", &self.family);
        push(out, "model.d", &self.d);
        push(out, "model.p", &self.p);
        push(out, "model.alpha", &self.alpha);
        push(out, "model.theta", &self.theta);
        push(out, "model.dirichlet_params", &self.dirichlet_params);
        push(out, "model.noise_sigma", &self.noise_sigma);
        push(out, "model.rotation_angle_bound", &self.rotation_bound);
    }
}

#[derive(Args)]
pub struct AnalyzeArgs {
    /// Input CSV, one observation per row, optional header.
    #[arg(long, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Number of exceedances for the measure.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    /// Exceedances for the subspace fit (default k).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    k_tilde: Option<u64>,
    /// Projection dimension, or `auto` for the selector.
    #[arg(long, value_name = "P|auto")]
    p: Option<String>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Transform margins to unit Fréchet by ranks first.
    #[arg(long)]
    standardize: bool,
    /// Tail index used in the functionals.
    #[arg(long)]
    alpha: Option<f64>,
    /// Leading coordinates the functionals (i) and (ii) refer to.
    #[arg(long)]
    p_model: Option<usize>,
    /// Threshold of functional (i).
    #[arg(long)]
    t_i: Option<f64>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Number of observations.
    #[arg(long)]
    n: Option<usize>,
    /// Seed; drawn from the OS and printed when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
pub struct RmseArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Sample size per replicate.
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated k grid.
    #[arg(long, value_name = "K1,K2,..")]
    k_grid: Option<String>,
    #[arg(long)]
    k_tilde: Option<usize>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated estimators: direct, pca-fixed, pca-auto, alt-fixed,
    /// alt-auto, truth.
    #[arg(long)]
    estimators: Option<String>,
    /// Dimension of the fixed-p estimators (default: model p).
    #[arg(long)]
    fixed_p: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Threshold of functional (i).
    #[arg(long)]
    t_i: Option<f64>,
    /// Four comma-separated truths instead of the oracle.
    #[arg(long, value_name = "T1,T2,T3,T4")]
    truths: Option<String>,
    /// Oracle draws for the truths.
    #[arg(long)]
    mc_size: Option<usize>,
    /// Skip the SVG charts.
    #[arg(long)]
    no_svg: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Clt,
    Rate,
    LocalIdentities,
    LocalExpansion,
    All,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(value_enum)]
    suite: Suite,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replicates of the clt and rate suites.
    #[arg(long)]
    replicates: Option<usize>,
    /// Trials of the local-identities suite.
    #[arg(long)]
    trials: Option<usize>,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    common: CommonArgs,
}

fn push<T: ToString>(out: &mut Vec<(String, String)>, key: &str, v: &Option<T>) {
    if let Some(v) = v {
        out.push((key.to_string(), v.to_string()));
    }
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got '{s}'"))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(format!("empty key in '{s}'"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration; exit code 2.
    Usage(String),
    /// Failure while running; exit code 1.
    Runtime(String),
    /// A verification check failed; exit code 1.
    Failed(usize),
}

impl CliError {
    pub fn usage(e: expca::Error) -> Self {
        CliError::Usage(e.to_string())
    }

    pub fn runtime(e: expca::Error) -> Self {
        CliError::Runtime(e.to_string())
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Runtime(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
            CliError::Failed(n) => write!(f, "{n} check(s) failed"),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(a) => analyze::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::Rmse(a) => rmse::run(a),
        Command::Verify(a) => verify::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            match e {
                CliError::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
