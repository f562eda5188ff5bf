mod commands;
mod config;
mod source;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use protoclust::Method;

use crate::source::Generator;

#[derive(Debug, Parser)]
#[command(name = "protoclust", version, about = "Two-stage prototype clustering experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
    /// Cross-validate one method on one dataset.
    Run(RunArgs),
    /// Cross-validate every method on every dataset and write a result bundle.
    Matrix(MatrixArgs),
    /// Summarize a result bundle.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// lines, banana, highleyman, spherical or simple.
    pub generator: Generator,
    /// Total points for `lines`, points per class otherwise.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub segments: Option<usize>,
    /// Noise standard deviation of `banana`.
    #[arg(long)]
    pub s: Option<f64>,
    /// Class-0 mean offset of `spherical`.
    #[arg(long)]
    pub u: Option<f64>,
    /// Distance between the class means of `simple`.
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Defaults to `<out-dir>/<generator>.csv`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, env = "PROTOCLUST_OUT", default_value = "protoclust-out")]
    pub out_dir: PathBuf,
}

/// Settings shared by `run` and `matrix`; each overrides the config file.
#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// TOML experiment file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long = "folds")]
    pub k_folds: Option<usize>,
    /// Cluster count; defaults to the class count, or the discovered count for soinak.
    #[arg(long)]
    pub nc: Option<usize>,
    #[arg(long)]
    pub soinn_lambda: Option<usize>,
    #[arg(long)]
    pub soinn_age_dead: Option<usize>,
    #[arg(long)]
    pub soinn_lt: Option<usize>,
    #[arg(long, env = "PROTOCLUST_OUT", default_value = "protoclust-out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    #[arg(long)]
    pub method: Option<Method>,
    /// `gen:<name>[:k=v,...]` or a CSV path.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Defaults to `<out-dir>/<method>_<dataset>.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Append the summary row to this CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Comma-separated; defaults to all eight methods.
    #[arg(long, value_delimiter = ',')]
    pub methods: Vec<Method>,
    /// Repeat for each dataset.
    #[arg(long = "dataset")]
    pub datasets: Vec<String>,
    /// Worker threads; defaults to one per core.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Bundle directory written by `matrix`.
    #[arg(env = "PROTOCLUST_OUT", default_value = "protoclust-out")]
    pub dir: PathBuf,
}

/// Error with its exit status: 2 for usage or configuration, 1 at run time.
#[derive(Debug)]
pub enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Runtime(e) => e,
        }
    }
}

pub trait Classify<T> {
    fn usage(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Usage(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => commands::generate(&args),
        Command::Run(args) => commands::run(&args),
        Command::Matrix(args) => commands::matrix(&args),
        Command::Report(args) => commands::report(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(failure.code())
        }
    }
}
