//! Batch front end for the stress-scenario library: ingest CSV market data,
//! fit models, estimate scenarios, bootstrap intervals, run simulation
//! studies, and emit SVG diagnostics.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod data;
mod plot;

/// Failures split by who has to act: `User` covers bad inputs and infeasible
/// requests (exit 1), `Internal` covers bugs and environment faults (exit 2).
#[derive(Debug)]
pub enum CliError {
    User(String),
    Internal(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::User(msg) => write!(f, "{msg}"),
            CliError::Internal(msg) => write!(f, "internal: {msg}"),
        }
    }
}

impl From<vinestress::Error> for CliError {
    // Library errors describe problems with the supplied data or settings
    // (too few rows, values out of range, infeasible thresholds), so they
    // are the user's to fix.
    fn from(e: vinestress::Error) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    // Serializing our own reports cannot fail on valid data; if it does,
    // that is a bug here, not in the input.
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("serializing output failed: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "vinestress",
    version,
    about = "Reverse stress testing with vine copulas: fit joint models of \
             risk factors and portfolio losses, find the most likely stress \
             scenarios, and quantify their uncertainty."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Input CSVs shared by every data-driven subcommand.
#[derive(Args)]
struct DataArgs {
    /// CSV of exchange-rate levels: date column first, one column per factor.
    #[arg(long)]
    rates: PathBuf,
    /// CSV of portfolio values: date column plus exactly one value column.
    #[arg(long)]
    values: PathBuf,
}

/// How the stress threshold is chosen: an exceedance level mapped to an
/// empirical loss quantile, or an absolute override.
#[derive(Args)]
struct ThresholdArgs {
    /// Exceedance probability p; the threshold becomes the empirical
    /// (1-p)-quantile of the observed losses.
    #[arg(long, default_value_t = 0.01)]
    level: f64,
    /// Absolute loss threshold, overriding --level.
    #[arg(long)]
    threshold: Option<f64>,
}

/// Search-budget knobs for the differential-evolution optimizer.
#[derive(Args)]
struct SearchArgs {
    #[arg(long, default_value_t = 50)]
    de_population: usize,
    #[arg(long, default_value_t = 2000)]
    de_iterations: usize,
    #[arg(long, default_value_t = 4)]
    de_restarts: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Cm1,
    Cm2,
    Cm3,
    Gkk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KindArg {
    SkewT,
    Hybrid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum KernelArg {
    Linear,
    Gaussian,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a marginal model to every factor and to the loss.
    FitMarginals {
        #[command(flatten)]
        data: DataArgs,
        /// Marginal family used for every column unless --spec overrides it.
        #[arg(long, value_enum, default_value_t = KindArg::SkewT)]
        kind: KindArg,
        /// TOML table mapping column names to families, e.g. `eur = "hybrid"`.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Write the JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a regular vine on the probability-integral transforms of the
    /// factors and the loss, and print the selected trees.
    FitVine {
        #[command(flatten)]
        data: DataArgs,
        /// Marginal models produced by fit-marginals.
        #[arg(long)]
        marginals: PathBuf,
        /// Write the fitted model JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate rank correlation and upper tail dependence of each factor
    /// against the loss.
    Dependence {
        #[command(flatten)]
        data: DataArgs,
        /// Rank threshold for the tail-dependence estimate, in (0.5, 1).
        #[arg(long, default_value_t = 0.95)]
        tail_threshold: f64,
        /// Also write the table as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Project the factors onto their first kernel principal component and
    /// split the days into two dependence regimes.
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = KernelArg::Linear)]
        kernel: KernelArg,
        /// Bandwidth of the Gaussian kernel; defaults to a data-driven value.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-day assignment CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the most likely stress scenario at a loss threshold.
    Estimate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[command(flatten)]
        threshold: ThresholdArgs,
        /// Marginal family for every column.
        #[arg(long, value_enum, default_value_t = KindArg::SkewT)]
        kind: KindArg,
        /// Pin factors that pass an independence pretest against the loss.
        #[arg(long)]
        screen: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the estimate JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bootstrap confidence intervals for a scenario estimate using a
    /// stationary block bootstrap of the observed days.
    BootstrapCi {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum)]
        method: MethodArg,
        #[command(flatten)]
        threshold: ThresholdArgs,
        #[arg(long, value_enum, default_value_t = KindArg::SkewT)]
        kind: KindArg,
        #[arg(long)]
        screen: bool,
        /// Number of bootstrap replications.
        #[arg(short = 'B', long, default_value_t = 500)]
        replications: usize,
        /// Expected block length; defaults to the cube root of the sample size.
        #[arg(long)]
        mean_block: Option<f64>,
        /// Two-sided confidence level of the reported intervals.
        #[arg(long, default_value_t = 0.95)]
        interval_level: f64,
        /// Reuse the vine trees selected on the original data for every
        /// replication instead of re-selecting them.
        #[arg(long)]
        freeze_structure: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the interval report JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a Monte Carlo study of the estimators against a known model.
    SimulateStudy {
        /// TOML study description; see the guide for the schema.
        #[arg(long)]
        config: PathBuf,
        /// Write the full report JSON here in addition to the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw each factor against the loss with scenario markers and the
    /// threshold rule-line, as one SVG document.
    Plot {
        #[command(flatten)]
        data: DataArgs,
        /// Estimate JSON files produced by `estimate`; repeatable.
        #[arg(long = "estimate", required = true)]
        estimates: Vec<PathBuf>,
        /// Write the SVG here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::FitMarginals { data, kind, spec, out } => {
            commands::fit_marginals(&data, kind, spec.as_deref(), out.as_deref())
        }
        Command::FitVine { data, marginals, out } => {
            commands::fit_vine(&data, &marginals, out.as_deref())
        }
        Command::Dependence { data, tail_threshold, out } => {
            commands::dependence(&data, tail_threshold, out.as_deref())
        }
        Command::Cluster { data, kernel, bandwidth, seed, out } => {
            commands::cluster(&data, kernel, bandwidth, seed, out.as_deref())
        }
        Command::Estimate { data, method, threshold, kind, screen, seed, search, out } => {
            commands::estimate(&data, method, &threshold, kind, screen, seed, &search, out.as_deref())
        }
        Command::BootstrapCi {
            data,
            method,
            threshold,
            kind,
            screen,
            replications,
            mean_block,
            interval_level,
            freeze_structure,
            seed,
            search,
            out,
        } => commands::bootstrap_ci(
            &data,
            method,
            &threshold,
            kind,
            screen,
            replications,
            mean_block,
            interval_level,
            freeze_structure,
            seed,
            &search,
            out.as_deref(),
        ),
        Command::SimulateStudy { config, out } => commands::simulate_study(&config, out.as_deref()),
        Command::Plot { data, estimates, out } => commands::plot(&data, &estimates, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let ok = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::User(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}
