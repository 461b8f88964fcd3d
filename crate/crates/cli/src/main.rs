use std::path::{Path, PathBuf};
use std::process::ExitCode;

use agebo_uq::pipeline::{cmd_ensemble, cmd_evaluate, cmd_report, cmd_search, resolve_run_dir, Overrides};
use agebo_uq::Error;
use clap::{Args, Parser, Subcommand};

/// Ensemble architecture and hyperparameter search with uncertainty estimates.
#[derive(Parser)]
#[command(name = "agebo-uq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SearchArgs {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Ensemble size used by `run`; stored in the resolved config.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Architecture and hyperparameter search into the configured run directory.
    Search(SearchArgs),
    /// Select the top-K models of a finished search.
    Ensemble {
        run_dir: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        force: bool,
    },
    /// Predict on the test split and write metrics and heatmaps.
    #[command(alias = "predict")]
    Evaluate {
        run_dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Convergence and model-spectrum tables.
    Report {
        run_dir: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Search, ensemble, evaluate and report in one go.
    Run(SearchArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::MissingData(_)
        | Error::InvalidSpec(_)
        | Error::InsufficientRecords { .. }
        | Error::Format { .. } => 2,
        _ => 1,
    }
}

fn overrides(a: &SearchArgs) -> Overrides {
    Overrides {
        workers: a.workers,
        max_evals: a.max_evals,
        seed: a.seed,
        k: a.k,
    }
}

fn search(a: &SearchArgs) -> agebo_uq::Result<PathBuf> {
    let r = cmd_search(&a.config, &overrides(a), a.force)?;
    if r.skipped {
        println!("{}: search already complete ({} records)", r.run_dir.display(), r.records);
    } else {
        println!("{}: {} records, {} successful", r.run_dir.display(), r.records, r.successes);
    }
    Ok(r.run_dir)
}

fn ensemble(run_dir: &Path, k: Option<usize>, force: bool) -> agebo_uq::Result<()> {
    let m = cmd_ensemble(run_dir, k, force)?;
    for member in &m.members {
        println!("{}\t{:.6}\t{}", member.id, member.valid_nll, member.checkpoint);
    }
    Ok(())
}

fn evaluate(run_dir: &Path, force: bool) -> agebo_uq::Result<()> {
    let summary = cmd_evaluate(run_dir, force)?;
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn dispatch(cli: Cli) -> agebo_uq::Result<()> {
    match cli.command {
        Command::Search(a) => search(&a).map(drop),
        Command::Ensemble { run_dir, k, force } => ensemble(&resolve_run_dir(&run_dir), k, force),
        Command::Evaluate { run_dir, force } => evaluate(&resolve_run_dir(&run_dir), force),
        Command::Report { run_dir, force } => {
            let out = cmd_report(&resolve_run_dir(&run_dir), force)?;
            println!("{}", out.display());
            Ok(())
        }
        Command::Run(a) => {
            let dir = search(&a)?;
            ensemble(&dir, None, a.force)?;
            evaluate(&dir, a.force)?;
            let out = cmd_report(&dir, a.force)?;
            println!("{}", out.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
