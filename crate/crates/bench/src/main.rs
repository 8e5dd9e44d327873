//! Benchmark CLI: run experiment grids, re-render reports from stored runs,
//! and validate dataset files against their schemas.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use tabfed_bench::config::{self, Overrides};
use tabfed_bench::report::{self, GroupBy};
use tabfed_bench::suite;

#[derive(Parser)]
#[command(
    name = "tabfed",
    version,
    about = "Unsupervised anomaly detection benchmarks on tabular data, centralized and federated"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupByArg {
    Mode,
    Clients,
    Mu,
}

#[derive(Subcommand)]
enum Command {
    /// Execute every cell of a config grid and persist results
    Run {
        /// Config file (JSON)
        config: PathBuf,
        /// Override the config's seed list with a single seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Stratified row-subsample fraction applied at load (desk-scale runs)
        #[arg(long)]
        subsample: Option<f64>,
        /// Worker threads for independent grid cells
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Search all score midpoints for the threshold instead of the
        /// quantile window (audit mode)
        #[arg(long)]
        exhaustive_threshold: bool,
    },
    /// Render the result table of a finished (or partial) run directory
    Report {
        /// Run directory containing results.jsonl
        results_dir: PathBuf,
        /// Variant dimension spread across table columns
        #[arg(long, value_enum, default_value = "mode")]
        group_by: GroupByArg,
    },
    /// Check a dataset csv against a schema and print its statistics
    ValidateData { schema: PathBuf, csv: PathBuf },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run {
            config,
            seed,
            out,
            subsample,
            threads,
            exhaustive_threshold,
        } => {
            let overrides = Overrides {
                seed,
                out,
                subsample,
                exhaustive_threshold,
            };
            let parsed = config::parse_config(&config, &overrides)?;
            eprintln!(
                "{} cells -> {}",
                parsed.specs.len(),
                parsed.output_dir.display()
            );
            let outcome = suite::run_suite(&parsed, threads)?;
            let (text, json) = report::render_report(&outcome.rows, GroupBy::Mode);
            println!("{text}");
            std::fs::write(parsed.output_dir.join("report.json"), json)?;
            if outcome.failures > 0 {
                eprintln!("{} of {} rows failed", outcome.failures, outcome.rows.len());
                Ok(ExitCode::from(1))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Command::Report {
            results_dir,
            group_by,
        } => {
            let rows = suite::load_rows(&results_dir)?;
            let group_by = match group_by {
                GroupByArg::Mode => GroupBy::Mode,
                GroupByArg::Clients => GroupBy::Clients,
                GroupByArg::Mu => GroupBy::Mu,
            };
            let (text, json) = report::render_report(&rows, group_by);
            print!("{text}");
            std::fs::write(results_dir.join("report.json"), json)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateData { schema, csv } => {
            let lines = suite::validate_data(&schema, &csv)?;
            for line in lines {
                println!("{line}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
