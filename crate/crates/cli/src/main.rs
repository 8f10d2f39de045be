use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use windcond_cli::{
    cmd_bootstrap, cmd_fit, cmd_metrics, cmd_simulate, cmd_study, CliResult, ConfigLayer, MetricsInput, Report,
    RunConfig, SEED_ENV,
};

/// Conditional wind speed and direction modeling.
///
/// Settings come from flags, then WINDCOND_SEED (seed only), then the
/// --config TOML file, then built-in defaults.
#[derive(Debug, Parser)]
#[command(name = "windcond", version)]
struct Cli {
    /// TOML file whose keys match the long flag names (with underscores)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the direction mixture, BWHR and BPQR to a wind record CSV
    Fit(ConfigLayer),
    /// Percentile bootstrap bands over whole years
    Bootstrap(ConfigLayer),
    /// Monte Carlo study on truth fixtures
    Study(ConfigLayer),
    /// Simulate from a fitted model and estimate the joint density
    Simulate(ConfigLayer),
    /// Recompute metrics from stored curve files
    Metrics {
        #[command(flatten)]
        layer: ConfigLayer,
        /// Estimated curves; repeat for replicates
        #[arg(long = "estimate", required = true)]
        estimates: Vec<PathBuf>,
        #[arg(long)]
        truth: PathBuf,
        /// Curve file holding the direction density
        #[arg(long)]
        weight: PathBuf,
        #[arg(long, default_value = "density")]
        weight_column: String,
    },
}

fn run(cli: Cli) -> CliResult<Report> {
    let file = match &cli.config {
        Some(path) => ConfigLayer::from_toml_file(path)?,
        None => ConfigLayer::default(),
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    let resolve = |flags: ConfigLayer| RunConfig::resolve(flags, file.clone(), env_seed.as_deref());
    match cli.command {
        Command::Fit(flags) => cmd_fit(&resolve(flags)?),
        Command::Bootstrap(flags) => cmd_bootstrap(&resolve(flags)?),
        Command::Study(flags) => cmd_study(&resolve(flags)?),
        Command::Simulate(flags) => cmd_simulate(&resolve(flags)?),
        Command::Metrics {
            layer,
            estimates,
            truth,
            weight,
            weight_column,
        } => cmd_metrics(
            &resolve(layer)?,
            &MetricsInput {
                estimates,
                truth,
                weight,
                weight_column,
            },
        ),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("{}", json!({ "warning": w }));
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&report.body).expect("json values serialize")
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
