//! `sigrep`: significant-representation tooling.
//!
//! Subcommands: `isvd-bench` (streamed vs direct decomposition benchmark),
//! `continual-run` (task-sequence training with the forgetting metrics),
//! `score` (anomaly map + image score of two feature-stack files), and
//! `report` (aggregate run reports into a summary table).
//!
//! Exit codes: 0 success, 1 usage/config, 2 numerical failure, 3 I/O.

mod commands;
mod config;
mod error;
mod fmat;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "sigrep", version, about = "memory-bounded significant-representation tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Benchmark the streamed decomposition against the direct one.
    IsvdBench {
        /// Experiment config (kind = isvd-bench).
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides run.out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a continual task sequence and emit run reports.
    ContinualRun {
        /// Experiment config (kind = continual-run).
        #[arg(long)]
        config: PathBuf,
        /// Replace the config's seed list with this single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides run.out).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score two FMAT feature stacks: anomaly map plus image score.
    Score {
        /// Reconstructed-sample feature stack.
        file_a: PathBuf,
        /// Comparison feature stack (same per-layer shapes).
        file_b: PathBuf,
        /// Optional config with a `[score]` section (map output size).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Accepted for interface uniformity; scoring is deterministic.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for map.fmat.
        #[arg(long)]
        out: PathBuf,
        /// Also write the map as map.csv for inspection.
        #[arg(long)]
        csv: bool,
    },
    /// Aggregate run-report directories into a single CSV.
    Report {
        /// One or more directories holding report_*.json files.
        #[arg(required = true)]
        run_dirs: Vec<PathBuf>,
        /// Also write the table to `<out>/summary.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn resolve_out(flag: Option<PathBuf>, from_config: Option<PathBuf>) -> CliResult<PathBuf> {
    flag.or(from_config).ok_or_else(|| {
        CliError::Usage("no output directory: pass --out or set run.out in the config".to_string())
    })
}

fn run() -> CliResult<()> {
    let cli = Cli::try_parse().map_err(|e| {
        // Help and version are not errors.
        if e.kind() == clap::error::ErrorKind::DisplayHelp
            || e.kind() == clap::error::ErrorKind::DisplayVersion
        {
            let _ = e.print();
            std::process::exit(0);
        }
        CliError::Usage(e.to_string())
    })?;

    match cli.command {
        Command::IsvdBench { config, seed, out } => {
            let ExperimentConfig::IsvdBench(mut cfg) = config::load_experiment(&config)? else {
                return Err(CliError::Usage(format!(
                    "{}: experiment.kind is not isvd-bench",
                    config.display()
                )));
            };
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            let out = resolve_out(out, cfg.out.clone())?;
            commands::cmd_isvd_bench(&cfg, &out)
        }
        Command::ContinualRun { config, seed, out } => {
            let ExperimentConfig::ContinualRun(mut cfg) = config::load_experiment(&config)? else {
                return Err(CliError::Usage(format!(
                    "{}: experiment.kind is not continual-run",
                    config.display()
                )));
            };
            if let Some(seed) = seed {
                cfg.seeds = vec![seed];
            }
            let out = resolve_out(out, cfg.out.clone())?;
            commands::cmd_continual_run(&cfg, &out)
        }
        Command::Score {
            file_a,
            file_b,
            config,
            seed: _,
            out,
            csv,
        } => {
            let score_cfg = match config {
                Some(path) => config::load_score(&path)?,
                None => config::ScoreConfig {
                    out_h: None,
                    out_w: None,
                },
            };
            commands::cmd_score(&file_a, &file_b, score_cfg, &out, csv)
        }
        Command::Report { run_dirs, out } => commands::cmd_report(&run_dirs, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
