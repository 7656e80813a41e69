mod commands;
mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sau_core::verify::Suite;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or config values.
    Usage(String),
    /// Missing files, unwritable outputs.
    Io(String),
    /// A verification or comparison did not pass; details are already printed.
    Failed(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) | CliError::Failed(m) => f.write_str(m),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Failed(_) => 1,
            CliError::Usage(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Parser)]
#[command(
    name = "sau",
    version,
    about = "Smooth activation units: curves, checks and small training runs"
)]
#[command(allow_negative_numbers = true)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG also works.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write value and derivatives of an activation over a grid as CSV.
    Eval(EvalArgs),
    /// Run a numerical invariant suite.
    Verify(VerifyArgs),
    /// Train a dense network and write per-epoch metrics as CSV.
    Train(TrainArgs),
    /// Train once per activation with shared settings and summarise.
    Compare(CompareArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
pub struct EvalArgs {
    #[arg(long, default_value = "sau")]
    pub activation: String,
    /// Initial slope for sau variants and prelu.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Sharpness for sau variants.
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long, default_value_t = -5.0)]
    pub xmin: f64,
    #[arg(long, default_value_t = 5.0)]
    pub xmax: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    /// CSV destination; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(value_parser = parse_suite)]
    pub suite: Suite,
    /// Pass threshold. oracle: closed form vs quadrature; grad: relative
    /// error; convergence: departure of each sup-norm ratio from 2.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Finite-difference step (grad).
    #[arg(long)]
    pub h: Option<f64>,
    /// Quadrature error target (oracle).
    #[arg(long)]
    pub quad_tol: Option<f64>,
    /// Extra sampled points at alpha 0.15, n 20000 (grad).
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Check this mollifier instead of the built-ins (mollifier). Known: doubled-gaussian.
    #[arg(long)]
    pub fixture: Option<String>,
}

fn parse_suite(s: &str) -> Result<Suite, String> {
    s.parse()
}

/// Settings shared by `train` and `compare`. Each may also come from the
/// config file under the same name; flags win.
#[derive(Args, Clone, Default)]
pub struct TrainFlags {
    /// mnist, xor or sine.
    #[arg(long)]
    pub dataset: Option<String>,
    /// MNIST directory; defaults to $SAU_DATA_DIR, then data/mnist.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Hidden layer widths, comma separated.
    #[arg(long)]
    pub arch: Option<String>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub n: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// adam or sgd.
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// constant or cosine.
    #[arg(long)]
    pub schedule: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use only the first N training samples.
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Use only the first N test samples.
    #[arg(long)]
    pub test_limit: Option<usize>,
    /// Number of sine-regression points.
    #[arg(long)]
    pub sine_points: Option<usize>,
    /// `key = value` file with any of the settings above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub activation: Option<String>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

#[derive(Args)]
pub struct CompareArgs {
    /// Comma-separated activation names, at least two.
    #[arg(long)]
    pub activations: Option<String>,
    /// Seeds per activation: seed, seed+1, ...
    #[arg(long)]
    pub repeats: Option<usize>,
    #[command(flatten)]
    pub flags: TrainFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Eval(a) => commands::eval(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Train(a) => commands::train(&a),
        Command::Compare(a) => commands::compare(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("sau: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
