mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::CliError;

/// Simulate, analyse and learn Bernoulli autoregressive networks.
#[derive(Debug, Parser)]
#[command(name = "bar", version)]
pub struct Cli {
    /// Master RNG seed (default 1; overrides the seed of a sweep config).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random valid model and write it as JSON.
    Generate(GenerateArgs),
    /// Simulate a trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Build the exact chain of a small model and report on it.
    Exact(ExactArgs),
    /// Evaluate the closed-form mixing, floor and sample-size bounds.
    Bounds(BoundsArgs),
    /// Learn the signed graph from a trajectory.
    Infer(InferArgs),
    /// Run a recovery sweep and write the CSV.
    Sweep(SweepArgs),
    /// Parse or generate a boolean network and simulate it.
    Rules(RulesArgs),
}

#[derive(Debug, clap::Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub p: usize,
    /// Common in-degree of every node.
    #[arg(long, conflicts_with = "max_degree")]
    pub d: Option<usize>,
    /// Draw every in-degree uniformly from 1..=max_degree instead.
    #[arg(long)]
    pub max_degree: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub a_min: f64,
    #[arg(long, default_value_t = 0.1)]
    pub b_min: f64,
    #[arg(long, default_value_t = 0.2)]
    pub b_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub rho_w: f64,
    /// Probability that an edge is positive.
    #[arg(long, default_value_t = 0.5)]
    pub sign_prob: f64,
    /// Draw weights uniformly below this cap, with b = 1 - row sum.
    #[arg(long)]
    pub weight_cap: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    BurnIn,
    Stationary,
    Zeros,
    Ones,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DynamicsArg {
    Bar,
    Rw,
    LazyRw,
}

#[derive(Debug, clap::Args)]
pub struct SimulateArgs {
    /// Model file or inline JSON.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_enum, default_value_t = InitArg::BurnIn)]
    pub init: InitArg,
    #[arg(long, value_enum, default_value_t = DynamicsArg::Bar)]
    pub dynamics: DynamicsArg,
    /// Holding probability of the lazy walk.
    #[arg(long, default_value_t = 0.5)]
    pub lazy_prob: f64,
}

#[derive(Debug, clap::Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub model: String,
    /// Mixing tolerances to report.
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.125, 0.0625])]
    pub theta: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    pub max_steps: usize,
    /// Write the distance-to-stationarity curve up to this many steps.
    #[arg(long)]
    pub tv_curve: Option<usize>,
    /// Write the stationary distribution as CSV instead of the report.
    #[arg(long)]
    pub stationary: bool,
}

#[derive(Debug, clap::Args)]
pub struct BoundsArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 0.125)]
    pub theta: f64,
    /// Degree cap; the model's max in-degree by default.
    #[arg(long)]
    pub d: Option<usize>,
    /// Refine the marginal floor with the exact marginals.
    #[arg(long)]
    pub refine: bool,
    /// Failure probability for the sample-size bounds.
    #[arg(long, default_value_t = 0.1)]
    pub gamma: f64,
    /// Selection margin for the sample-size bounds.
    #[arg(long, default_value_t = 0.05)]
    pub eps: f64,
    /// Trimming margin for the sample-size bounds.
    #[arg(long)]
    pub eps_tilde: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Holding probability used in the walk analysis.
    #[arg(long, default_value_t = 0.5)]
    pub lazy_prob: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Selection,
    KnownDegrees,
    Full,
}

#[derive(Debug, clap::Args)]
pub struct InferArgs {
    /// Trajectory CSV.
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Degree cap of the selection stage.
    #[arg(long)]
    pub d: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Full)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0.025)]
    pub tau: f64,
    /// Per-node degrees for known-degrees mode.
    #[arg(long, value_delimiter = ',')]
    pub degrees: Vec<usize>,
    /// Score the estimate against this model.
    #[arg(long, conflicts_with = "rules")]
    pub model: Option<String>,
    /// Score the estimate against this rules file.
    #[arg(long)]
    pub rules: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SweepArgs {
    /// Sweep config file or inline JSON.
    #[arg(long)]
    pub config: String,
    /// Fill the wall_ms column.
    #[arg(long)]
    pub wall_time: bool,
}

#[derive(Debug, clap::Args)]
pub struct RulesArgs {
    /// Rules file.
    #[arg(long, required_unless_present = "random")]
    pub rules: Option<PathBuf>,
    /// Generate a random AND/OR network with this many nodes instead.
    #[arg(long, conflicts_with = "rules")]
    pub random: Option<usize>,
    #[arg(long, default_value_t = 2)]
    pub fan_in: usize,
    #[arg(long)]
    pub noise: Option<f64>,
    /// Print the normalized rules instead of simulating.
    #[arg(long)]
    pub print: bool,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub burn_in: usize,
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let out = cli.out.as_deref();
    let seed = cli.seed.unwrap_or(1);
    match &cli.command {
        Command::Generate(args) => commands::generate(args, seed, out),
        Command::Simulate(args) => commands::simulate(args, seed, out),
        Command::Exact(args) => commands::exact(args, out),
        Command::Bounds(args) => commands::bounds(args, out),
        Command::Infer(args) => commands::infer(args, out),
        Command::Sweep(args) => commands::sweep(args, cli.seed, out),
        Command::Rules(args) => commands::rules(args, seed, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
