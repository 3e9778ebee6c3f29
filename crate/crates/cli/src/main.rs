mod commands;
mod inputs;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gfisher::{Error, Side};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "gfisher", version, about = "P-values for generalized Fisher combination statistics")]
struct Cli {
    /// Worker threads for simulation commands.
    #[arg(long, global = true, env = "GFISHER_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// P-value of one statistic for one input vector.
    Pvalue(PvalueArgs),
    /// minP and Cauchy omnibus p-values over several statistics.
    Omnibus(OmnibusArgs),
    /// Covariance matrix of the transformed summands, as CSV.
    Cov(CovArgs),
    /// Empirical type I error rates by Monte Carlo.
    SimulateTie(TieArgs),
    /// Empirical versus approximated right tail on a quantile grid.
    Survival(SurvivalArgs),
    /// Z statistics and their correlation from a regression design.
    GlmZ(GlmArgs),
    /// Write a generated correlation structure as CSV.
    Structure(StructureArgs),
}

/// Where the correlation matrix comes from (identity when neither is given).
#[derive(Args, Clone)]
pub struct SigmaArgs {
    /// Dense header-free CSV correlation matrix.
    #[arg(long)]
    pub sigma: Option<PathBuf>,
    /// Generated structure as kind:layout:param, e.g. equal:III:0.5.
    #[arg(long)]
    pub structure: Option<String>,
}

/// Numerical settings shared by the p-value methods.
#[derive(Args, Clone)]
pub struct MethodArgs {
    /// Sidedness of the input p-values: one or two.
    #[arg(long)]
    pub side: Option<Side>,
    /// Highest Hermite order kept in the covariance series.
    #[arg(long, default_value_t = gfisher::dependence::DEFAULT_KSTAR)]
    pub kstar: usize,
    /// Target accuracy of the quadratic-form distribution.
    #[arg(long, default_value_t = 1e-9)]
    pub cdf_acc: f64,
    /// Replicates for empirical skewness and kurtosis under dependence.
    #[arg(long)]
    pub moment_reps: Option<usize>,
    /// Seed for the empirical moments.
    #[arg(long)]
    pub moment_seed: Option<u64>,
}

#[derive(Args)]
pub struct PvalueArgs {
    /// Statistic definition JSON.
    #[arg(long)]
    pub def: PathBuf,
    /// Input z-scores.
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Input p-values.
    #[arg(long)]
    pub p: Option<PathBuf>,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    /// gb, mr, q, hyb, ggd123, ggd234 or ggdmr.
    #[arg(long, default_value = "hyb")]
    pub method: String,
    #[command(flatten)]
    pub num: MethodArgs,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct OmnibusArgs {
    /// JSON array of statistic definitions.
    #[arg(long)]
    pub defs: PathBuf,
    #[arg(long)]
    pub z: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<PathBuf>,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    /// Component method for every statistic; by default HYB where it
    /// applies and MR otherwise.
    #[arg(long)]
    pub method: Option<String>,
    #[command(flatten)]
    pub num: MethodArgs,
    /// Target absolute error of the minP probability.
    #[arg(long, default_value_t = 1e-4)]
    pub minp_tol: f64,
    /// Seed for the randomized lattice behind minP.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct CovArgs {
    #[arg(long)]
    pub def: PathBuf,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    #[arg(long)]
    pub side: Option<Side>,
    #[arg(long, default_value_t = gfisher::dependence::DEFAULT_KSTAR)]
    pub kstar: usize,
    /// Input count when neither the definition nor the matrix fixes it.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Simulation settings.
#[derive(Args, Clone)]
pub struct SimArgs {
    #[arg(long, default_value_t = 1_000_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Null model: gmm, or t:<nu> for the multivariate t.
    #[arg(long, default_value = "gmm")]
    pub model: String,
    /// Input count when neither the definition nor the matrix fixes it.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args)]
pub struct TieArgs {
    /// Statistic definition JSON.
    #[arg(long, conflicts_with = "defs")]
    pub def: Option<PathBuf>,
    /// JSON array of definitions; simulates the omnibus test instead.
    #[arg(long)]
    pub defs: Option<PathBuf>,
    /// Omnibus combination when --defs is given: cc or minp.
    #[arg(long, default_value = "cc")]
    pub omnibus: String,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    /// Comma-separated methods (component method for omnibus runs).
    #[arg(long, default_value = "hyb")]
    pub method: String,
    #[command(flatten)]
    pub num: MethodArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// Comma-separated significance levels.
    #[arg(long, default_value = "0.05,0.01,0.001,0.0001")]
    pub alphas: String,
    /// threshold or per-replicate.
    #[arg(long, default_value = "threshold")]
    pub mode: String,
    /// CSV table of rates and ratios.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct SurvivalArgs {
    #[arg(long)]
    pub def: PathBuf,
    #[command(flatten)]
    pub sigma: SigmaArgs,
    #[arg(long, default_value = "hyb")]
    pub method: String,
    #[command(flatten)]
    pub num: MethodArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    /// CSV of the survival curves.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct GlmArgs {
    /// Design manifest JSON naming the data CSV and its columns.
    #[arg(long)]
    pub design: PathBuf,
    /// score, marginal or joint.
    #[arg(long, default_value = "score")]
    pub kind: String,
    /// Residual standard deviation to use instead of the estimate.
    #[arg(long)]
    pub known_sigma: Option<f64>,
    /// Sidedness for the reported p-values.
    #[arg(long, default_value = "two")]
    pub side: Side,
    /// Also write the estimated correlation matrix as CSV.
    #[arg(long)]
    pub sigma_out: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct StructureArgs {
    /// equal, poly, inv-equal or inv-poly.
    #[arg(long)]
    pub kind: String,
    /// I, II or III.
    #[arg(long)]
    pub layout: String,
    #[arg(long)]
    pub n: usize,
    /// rho for equal kinds, kappa for poly kinds.
    #[arg(long)]
    pub param: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: u8,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoSolution { .. } => 3,
        e if e.is_input_error() => 2,
        Error::Parse(_) | Error::NotPsd { .. } | Error::MrDegenerate { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build_global();
    }
    let result = match &cli.command {
        Command::Pvalue(a) => commands::pvalue(a),
        Command::Omnibus(a) => commands::omnibus(a),
        Command::Cov(a) => commands::cov(a),
        Command::SimulateTie(a) => commands::simulate_tie(a),
        Command::Survival(a) => commands::survival(a),
        Command::GlmZ(a) => commands::glm_z(a),
        Command::Structure(a) => commands::structure(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = exit_code(&e);
            let report = ErrorReport { error: ErrorBody { kind: e.kind(), message: e.to_string(), exit_code: code } };
            println!("{}", serde_json::to_string_pretty(&report).expect("error report serializes"));
            ExitCode::from(code)
        }
    }
}
