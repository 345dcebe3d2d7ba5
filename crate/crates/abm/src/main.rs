//! Command-line front end for the behavior-model pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abm::pipeline::{self, PipelineConfig, Stage};
use abm::Error;

#[derive(Parser)]
#[command(
    name = "abm",
    version,
    about = "Learn a planning agent's behavior in an adversarial gridworld and explain it with decision trees"
)]
struct Cli {
    /// TOML configuration file; defaults apply for anything not set.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Master seed, overriding the config file.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Output directory, overriding the config file.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline, or a single stage with --stage.
    Run {
        /// One of: train-model, collect, imagine, featurize, label,
        /// fit-tree, evaluate, export-dot.
        #[arg(long, value_name = "NAME")]
        stage: Option<String>,
    },
    /// Collect exploration episodes and fit the dynamics ensemble.
    TrainModel,
    /// Collect planner-driven episodes in the true environment.
    Collect,
    /// Roll episodes inside the learned model only.
    Imagine,
    /// Turn episodes into per-step feature tables.
    Featurize,
    /// Attach outcome and strategy labels to the feature tables.
    Label,
    /// Split the real episodes and fit the four behavior trees.
    FitTree,
    /// Score every tree on the held-out real test episodes.
    Evaluate,
    /// Render the fitted trees as Graphviz files.
    ExportDot,
}

fn execute(cli: Cli) -> abm::Result<()> {
    let config =
        PipelineConfig::load(cli.config.as_deref())?.resolve(cli.seed, cli.out.as_deref())?;
    let stage = match cli.command {
        Command::Run { stage: None } => return pipeline::run_all(&config),
        Command::Run { stage: Some(name) } => Stage::from_name(&name).ok_or_else(|| {
            let known: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
            Error::Usage(format!("unknown stage {name:?}; stages are {}", known.join(", ")))
        })?,
        Command::TrainModel => Stage::TrainModel,
        Command::Collect => Stage::Collect,
        Command::Imagine => Stage::Imagine,
        Command::Featurize => Stage::Featurize,
        Command::Label => Stage::Label,
        Command::FitTree => Stage::FitTree,
        Command::Evaluate => Stage::Evaluate,
        Command::ExportDot => Stage::ExportDot,
    };
    pipeline::run_stage(&config, stage)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
