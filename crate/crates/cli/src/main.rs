//! `tstf`: generate match datasets, train the transformer and its
//! ablation, and compare them with the classical evaluators.
//!
//! Exit codes: 0 success, 1 unexpected failure, 2 missing input or
//! unwritable output, 3 configuration or precondition violation.

mod commands;
mod config;
mod fail;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::{Overrides, RunConfig};
use crate::fail::Failure;

#[derive(Debug, Parser)]
#[command(name = "tstf", version, about = "Situation assessment for a micro RTS game")]
struct Cli {
    /// TOML run configuration [default: built-in defaults]
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for every artifact [default: out]
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Seed for the tournament, split, initialisation and batch order [default: 0]
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,

    /// Model preset: desk, tstf-6, tstf-8 or timesformer-12 [default: desk]
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Comma-separated game-progress fractions in (0, 1] [default: 0.04,0.2,0.4,0.6,0.8,1]
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    fractions: Option<Vec<f64>>,

    /// Match for `timeline` [default: first test-split match]
    #[arg(long, global = true, value_name = "ID")]
    match_id: Option<u32>,

    /// Worker threads [default: one per core]
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Play the round-robin tournament and write the dataset and split
    Generate {
        /// Print match and split counts without playing [default: false]
        #[arg(long)]
        plan_only: bool,
    },
    /// Train the transformer and its space-time ablation
    Train,
    /// Score every model and evaluator on the test split
    Eval,
    /// Progress-stratified tables and OP stability for every evaluator
    Compare,
    /// Per-step predictions of every evaluator on one match
    Timeline,
    /// Parameter breakdown of each preset
    Params,
}

fn run(cli: Cli) -> Result<(), Failure> {
    let overrides = Overrides {
        out: cli.out,
        seed: cli.seed,
        preset: cli.preset,
        fractions: cli.fractions,
        match_id: cli.match_id,
        threads: cli.threads,
    };
    let cfg = RunConfig::resolve(cli.config.as_deref(), overrides)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Other(e.to_string()))?;
    }
    match cli.command {
        Command::Generate { plan_only } => commands::cmd_generate(&cfg, plan_only),
        Command::Train => commands::cmd_train(&cfg),
        Command::Eval => commands::cmd_eval(&cfg),
        Command::Compare => commands::cmd_compare(&cfg),
        Command::Timeline => commands::cmd_timeline(&cfg),
        Command::Params => commands::cmd_params(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit_code())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn fractions_split_on_commas() {
        let cli = Cli::try_parse_from(["tstf", "compare", "--fractions", "0.5,1"]).unwrap();
        assert_eq!(cli.fractions, Some(vec![0.5, 1.0]));
    }
}
