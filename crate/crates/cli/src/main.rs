mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use bindep::estimation::SampleMode;
use bindep::inference::{CombinationStrategy, Method};
use clap::{Args, Parser, Subcommand, ValueEnum};

use error::CliError;

/// Dependence measures, confidence intervals and simulations for pairs of
/// binary events.
#[derive(Debug, Parser)]
#[command(name = "bindep", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Standard,
    Fisher,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Standard => Method::Standard,
            MethodArg::Fisher => Method::Fisher,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Iid,
    Timeseries,
}

impl From<ModeArg> for SampleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Iid => SampleMode::Iid,
            ModeArg::Timeseries => SampleMode::TimeSeries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum StrategyArg {
    Full,
    NoSigmaTest,
    NoPqTest,
    Basic,
}

impl From<StrategyArg> for CombinationStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Full => CombinationStrategy::Full,
            StrategyArg::NoSigmaTest => CombinationStrategy::NoSigmaTest,
            StrategyArg::NoPqTest => CombinationStrategy::NoPqTest,
            StrategyArg::Basic => CombinationStrategy::Basic,
        }
    }
}

#[derive(Debug, Args)]
pub struct Global {
    /// Master seed for every random stream.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Confidence level of the intervals.
    #[arg(long, global = true)]
    pub level: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    /// Whether observations are iid or a time series (HAC covariance).
    #[arg(long, global = true, value_enum)]
    pub mode: Option<ModeArg>,
    /// Bandwidth of the HAC estimator; defaults to floor(1.3 n^0.2).
    #[arg(long, global = true)]
    pub hac_bandwidth: Option<usize>,
    /// Print 17 significant digits instead of 6.
    #[arg(long, global = true)]
    pub full_precision: bool,
    /// Combination strategy for the tests on Cole's C.
    #[arg(long, global = true, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Monte Carlo draws for the simulated limit laws.
    #[arg(long, global = true)]
    pub mc_draws: Option<usize>,
    /// Spacing of the candidate values when inverting the test for C.
    #[arg(long, global = true)]
    pub grid_step: Option<f64>,
    /// Write the result to a file instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Measures and confidence intervals for one 2×2 table or two binary columns.
    Measure(commands::measure::MeasureArgs),
    /// Pairwise measure matrices over the binary columns of a CSV file.
    Matrix(commands::matrix::MatrixArgs),
    /// Coverage simulation for the confidence intervals.
    Simulate(commands::simulate::SimulateArgs),
    /// Values of Q, φ and C over a grid of margins with one measure held fixed.
    Surface(commands::surface::SurfaceArgs),
    /// Simulated Ĉ against its limit law.
    LimitLaw(commands::limit_law::LimitLawArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Measure(a) => commands::measure::run(&cli.global, a),
        Command::Matrix(a) => commands::matrix::run(&cli.global, a),
        Command::Simulate(a) => commands::simulate::run(&cli.global, a),
        Command::Surface(a) => commands::surface::run(&cli.global, a),
        Command::LimitLaw(a) => commands::limit_law::run(&cli.global, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
