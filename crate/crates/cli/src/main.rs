use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lowdev_cli::config::TaskKind;
use lowdev_cli::{resolve_out_dir, run_experiment, CliError, ExperimentConfig, RunOptions};

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "LOWDEV_OUT";

#[derive(Parser)]
#[command(name = "lowdev", version, about = "Lower-deviation constants and simulations for branching random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every task in the config.
    Run(Args),
    /// Rate constants (and the optional a-sweep).
    Rates(Args),
    /// Branching random walk simulations.
    Simulate(Args),
    /// Importance-sampling walk oracle.
    Oracle(Args),
    /// Strategy lower bounds.
    Bound(Args),
    /// Regime tables.
    Table(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's output_dir, then $LOWDEV_OUT.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn execute(args: &Args, only: Option<TaskKind>) -> Result<(), CliError> {
    if let Some(j) = args.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Config(format!("--jobs: {e}")))?;
    }
    let cfg = ExperimentConfig::load(&args.config)?;
    let env = std::env::var(OUT_ENV).ok();
    let out = resolve_out_dir(args.out.as_deref(), &cfg, env.as_deref());
    let opts = RunOptions { out, seed: args.seed.unwrap_or(cfg.seed), only };
    let files = run_experiment(&cfg, &opts)?;
    for f in files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, only) = match &cli.command {
        Command::Run(a) => (a, None),
        Command::Rates(a) => (a, Some(TaskKind::Rates)),
        Command::Simulate(a) => (a, Some(TaskKind::Simulate)),
        Command::Oracle(a) => (a, Some(TaskKind::Oracle)),
        Command::Bound(a) => (a, Some(TaskKind::Strategy)),
        Command::Table(a) => (a, Some(TaskKind::Table)),
    };
    match execute(args, only) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lowdev: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
