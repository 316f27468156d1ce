mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::commands::Failure;
use crate::config::RunConfig;

/// Option pricing benchmark: simulate quotes, train tree and network
/// models, and rank them against Black-Scholes.
#[derive(Debug, Parser)]
#[command(name = "optbench", version)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Global seed for generation, splitting and training.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Gbdt5,
    Gbdt10,
    Mlp3,
    Mlp5,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gbdt5 => "gbdt5",
            ModelKind::Gbdt10 => "gbdt10",
            ModelKind::Mlp3 => "mlp3",
            ModelKind::Mlp5 => "mlp5",
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a quote dataset into <out>/dataset.csv.
    Gen,
    /// Filter a dataset and write its train/val/test splits.
    Split {
        /// Dataset CSV (default <out>/dataset.csv).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Train one model preset on the training split.
    Train {
        #[arg(long, value_enum)]
        model: ModelKind,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score models and baselines on the held-out test split.
    Evaluate {
        /// Model files written by `train`.
        #[arg(long, num_args = 1..)]
        models: Vec<PathBuf>,
        /// Add Black-Scholes baselines priced with implied and realized volatility.
        #[arg(long)]
        include_bs: bool,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Summary statistics and histograms for every dataset column.
    Report {
        #[arg(long)]
        data: Option<PathBuf>,
    },
}

fn resolve_config(cli: &Cli, data: Option<&PathBuf>) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if let Some(data) = data {
        cfg.data = Some(data.clone());
    }
    cfg.resolve_seeds();
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let data = match &cli.command {
        Command::Split { data } | Command::Train { data, .. } | Command::Evaluate { data, .. } | Command::Report { data } => {
            data.as_ref()
        }
        Command::Gen => None,
    };
    let cfg = match resolve_config(&cli, data) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let outcome = match &cli.command {
        Command::Gen => commands::gen(&cfg),
        Command::Split { .. } => commands::split(&cfg),
        Command::Train { model, .. } => commands::train(&cfg, *model),
        Command::Evaluate {
            models, include_bs, ..
        } => commands::evaluate(&cfg, models, *include_bs),
        Command::Report { .. } => commands::report(&cfg),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error());
            ExitCode::from(match failure {
                Failure::Usage(_) => 1,
                Failure::Data(_) => 2,
                Failure::Training(_) => 3,
            })
        }
    }
}
