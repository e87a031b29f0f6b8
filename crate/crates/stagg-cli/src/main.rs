//! `stagg`: learn spatial and temporal aggregations of a joint power/gas
//! planning instance, solve the reduced models, and evaluate them against
//! the full problem with the three-step upper-bound heuristic.

use std::path::PathBuf;

use anyhow::Result;
use clap::{Parser, Subcommand};

use stagg_cli::{config, pipeline, synth};

use pipeline::RunContext;

#[derive(Parser)]
#[command(
    name = "stagg",
    about = "Spatio-temporal aggregation toolkit for power/gas expansion planning",
    version
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "stagg.toml")]
    config: PathBuf,
    /// Override the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides STAGG_OUT and the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the experiment grid.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance and dataset with planted structure.
    Synth,
    /// Read and normalize the dataset; build the affinity graph.
    Ingest,
    /// Train the autoencoders needed by the experiment grid.
    Train,
    /// Retrieve spatial and temporal aggregations for every grid cell.
    Aggregate,
    /// Build the aggregated planning models and export them as MPS.
    Build,
    /// Solve the aggregated models.
    Solve,
    /// Run the three-step upper-bound evaluation for every grid cell.
    Evaluate,
    /// Summarize the evaluation ledger into comparison tables.
    Report,
    /// Run the whole pipeline end to end.
    All,
}

fn main() -> Result<()> {
    let cli = Cli::parse();

    if let Command::Synth = cli.command {
        let config = config::RunConfig::load(&cli.config)?;
        let mut section = config.synth.clone().unwrap_or_default();
        if let Some(seed) = cli.seed {
            section.seed = seed;
        }
        let out = cli.out.unwrap_or_else(|| {
            cli.config
                .parent()
                .unwrap_or(std::path::Path::new("."))
                .join("data")
        });
        synth::write_all(&section, &out)?;
        println!(
            "synth: instance + dataset + truth.json under {}",
            out.display()
        );
        return Ok(());
    }

    let ctx = RunContext::prepare(&cli.config, cli.out, cli.seed, cli.jobs)?;
    println!("run {} -> {}", ctx.run_id, ctx.run_dir.display());
    match cli.command {
        Command::Synth => unreachable!(),
        Command::Ingest => pipeline::cmd_ingest(&ctx),
        Command::Train => pipeline::cmd_train(&ctx),
        Command::Aggregate => pipeline::cmd_aggregate(&ctx),
        Command::Build => pipeline::cmd_build(&ctx),
        Command::Solve => pipeline::cmd_solve(&ctx),
        Command::Evaluate => pipeline::cmd_evaluate(&ctx),
        Command::Report => pipeline::cmd_report(&ctx),
        Command::All => pipeline::cmd_all(&ctx),
    }
}
