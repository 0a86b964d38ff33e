//! `acbandit`: run the constrained actor-critic bandit and its simulation
//! studies from an experiment file.

mod checkpoint;
mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Overrides;

#[derive(Parser)]
#[command(name = "acbandit", version, about)]
#[command(after_help = "Any config key can be overridden with ACBANDIT_<SECTION>__<KEY>, e.g. ACBANDIT_RUN__T=500.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment file (TOML).
    config: PathBuf,
    /// Master seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides output.dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads, 0 for all cores (overrides run.workers).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one user; writes trajectory.csv and summary.csv.
    Run(Common),
    /// Replicate study; writes study.csv and aggregates.csv.
    Study {
        #[command(flatten)]
        common: Common,
        /// Number of simulated users (overrides run.replicates).
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Oracle multiplier and optimal policy; writes oracle.csv.
    Oracle(Common),
    /// Myopic equilibrium policy; writes myopic.csv.
    Myopic(Common),
    /// Cumulative regret curve of the learner; writes regret.csv.
    Regret {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

fn overrides(c: &Common, replicates: Option<usize>) -> Overrides {
    Overrides { seed: c.seed, out: c.out.clone(), workers: c.workers, replicates }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, replicates) = match &cli.command {
        Command::Run(c) | Command::Oracle(c) | Command::Myopic(c) => (c, None),
        Command::Study { common, replicates } | Command::Regret { common, replicates } => (common, *replicates),
    };
    let result = commands::load(&common.config, &overrides(common, replicates)).and_then(|exp| match cli.command {
        Command::Run(_) => commands::run(&exp),
        Command::Study { .. } => commands::study(&exp),
        Command::Oracle(_) => commands::oracle(&exp),
        Command::Myopic(_) => commands::myopic(&exp),
        Command::Regret { .. } => commands::regret(&exp),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
