use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use migration_cli::artifacts::DirLock;
use migration_cli::config::PipelineConfig;
use migration_cli::{commands, UsageError};

#[derive(Parser)]
#[command(
    name = "migrate",
    about = "Staged analysis pipeline for community-ban migration data",
    version
)]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the root seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (reserved; stages currently run single-threaded).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Override the output directory from the config.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse raw post files, label users, persist the corpus and label table.
    Ingest,
    /// Train community embeddings and the similarity table.
    Similarity,
    /// Score text and assemble the model matrix.
    Features,
    /// Estimate the two-step selection model.
    Fit,
    /// Train and cross-validate the hierarchical classifier.
    Classify,
    /// Render the regression table, margin curves, and model comparison.
    Report,
}

impl Command {
    fn stage(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Similarity => "similarity",
            Command::Features => "features",
            Command::Fit => "fit",
            Command::Classify => "classify",
            Command::Report => "report",
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let config_path = cli
        .config
        .as_deref()
        .ok_or_else(|| UsageError("--config <path> is required".to_string()))?;
    let config =
        PipelineConfig::load(config_path, cli.seed, cli.output.as_deref())?;
    let stage = cli.command.stage();
    config.check_input_paths(stage)?;

    let _lock = DirLock::acquire(&config.output_dir)?;
    let config_hash = config.config_hash();
    match cli.command {
        Command::Ingest => commands::ingest::run(&config, &config_hash),
        Command::Similarity => commands::similarity::run(&config, &config_hash),
        Command::Features => commands::features::run(&config, &config_hash),
        Command::Fit => commands::fit::run(&config, &config_hash),
        Command::Classify => commands::classify::run(&config, &config_hash),
        Command::Report => commands::report::run(&config, &config_hash),
    }
    .map_err(|e| e.context(format!("stage '{stage}' failed")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.downcast_ref::<UsageError>().is_some()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
