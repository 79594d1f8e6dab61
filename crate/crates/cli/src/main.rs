//! `sdoh` — annotate data-dictionary variables into SDOH domains through a
//! chat-completion endpoint (or a deterministic mock), score the runs, merge
//! domain-filtered tract panels onto patient records, and run the prediction
//! harness.

mod commands;
mod config;
mod error;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::config::FileConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "sdoh", version, about = "SDOH annotation and integration pipeline")]
struct Cli {
    /// Key=value config file; command-line flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for all randomness (exemplar sampling, fold assignment).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for output artifacts.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Log progress details to stderr.
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a dictionary through the classification prompts and score it.
    Annotate(commands::annotate::AnnotateArgs),
    /// Render model-by-subset tables from completed annotate runs.
    Report(commands::report::ReportArgs),
    /// Inter-annotator agreement over a dictionary's annotator columns.
    Agree(commands::agree::AgreeArgs),
    /// Merge tract-level panels onto patient records.
    Merge(commands::merge::MergeArgs),
    /// Cross-validated prediction over a merged design matrix.
    Predict(commands::predict::PredictArgs),
}

/// Shared settings resolved from globals plus the config file.
pub struct Context {
    pub config: FileConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = FileConfig::load(cli.config.as_deref())?;
    let seed = match cli.seed {
        Some(seed) => seed,
        None => config.parse::<u64>("seed")?.unwrap_or(0),
    };
    let out_dir = cli
        .out_dir
        .or_else(|| config.get("out_dir").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("sdoh-out"));
    let ctx = Context {
        config,
        seed,
        out_dir,
    };

    match cli.command {
        Command::Annotate(args) => commands::annotate::run(&ctx, args),
        Command::Report(args) => commands::report::run(&ctx, args),
        Command::Agree(args) => commands::agree::run(&ctx, args),
        Command::Merge(args) => commands::merge::run(&ctx, args),
        Command::Predict(args) => commands::predict::run(&ctx, args),
    }
}

fn main() {
    let cli = Cli::parse();
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
