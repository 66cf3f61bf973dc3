//! `kgboost`: per-relation boosted-tree link prediction over pre-trained
//! entity embeddings, as reproducible batch runs.

mod commands;
mod config;
mod manifest;
mod workdir;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "kgboost",
    about = "Knowledge-base completion with per-relation boosted-tree classifiers",
    version
)]
struct Cli {
    /// Run configuration file (key = value lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the configured working directory.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Override the configured master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Thread count (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Force deterministic mode (the default; recorded in the manifest).
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the dataset and build relation-analysis artifacts.
    Prepare,
    /// Train the entity/relation embedding model.
    TrainEmbeddings {
        /// Embedding family: translational | rotational.
        #[arg(long)]
        kind: Option<String>,
        /// Embedding dimension override.
        #[arg(long)]
        dim: Option<usize>,
        /// Continue from the last checkpoint.
        #[arg(long)]
        resume: bool,
    },
    /// Train one boosted classifier per relation and inverse relation.
    TrainClassifiers {
        /// Skip relations whose model file already exists.
        #[arg(long)]
        resume: bool,
    },
    /// Rank all test triples and write metric reports.
    Evaluate {
        /// Evaluate only the first N test triples.
        #[arg(long)]
        subset: Option<usize>,
        /// Bypass modules: relation-inference, rcwc, lcwa-prediction.
        #[arg(long, value_delimiter = ',')]
        ablate: Vec<String>,
    },
    /// Score candidate tails for one (head, relation) query.
    Predict {
        #[arg(long)]
        head: String,
        #[arg(long)]
        relation: String,
        /// How many tails to print.
        #[arg(short, long, default_value_t = 10)]
        k: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli
        .config
        .as_ref()
        .context("--config <path> is required")?;
    let mut cfg = config::load_config(config_path)?;
    if let Some(workdir) = cli.workdir {
        cfg.workdir = workdir;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads {
        cfg.threads = threads;
    }
    if cli.deterministic {
        cfg.deterministic = true;
    }
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .context("cannot size the thread pool")?;
    }

    match cli.command {
        Command::Prepare => commands::prepare(&cfg),
        Command::TrainEmbeddings { kind, dim, resume } => {
            commands::train_embeddings(&cfg, kind.as_deref(), dim, resume)
        }
        Command::TrainClassifiers { resume } => commands::train_classifiers(&cfg, resume),
        Command::Evaluate { subset, ablate } => commands::evaluate_cmd(&cfg, subset, &ablate),
        Command::Predict { head, relation, k } => commands::predict(&cfg, &head, &relation, k),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {:#}", err);
            ExitCode::FAILURE
        }
    }
}
