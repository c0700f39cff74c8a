//! `topicchoice`: run the clustering, modeling and slate pipeline from the
//! command line.
//!
//! Exit status: 0 on success, 1 for input/configuration/model errors, 2 for
//! usage errors, 3 when a required artifact is missing or stale, and the
//! checkpoint error code (10-15) when a binary file cannot be read.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use topicchoice::optimizer::SlateMethod;

use crate::config::RunConfig;
use crate::manifest::Workdir;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] topicchoice::Error),
    #[error("{0}")]
    Artifact(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(topicchoice::Error::Checkpoint(e)) => e.code(),
            CliError::Core(_) => 1,
            CliError::Artifact(_) => 3,
        }
    }
}

impl From<topicchoice::CheckpointError> for CliError {
    fn from(e: topicchoice::CheckpointError) -> Self {
        CliError::Core(e.into())
    }
}

#[derive(Debug, Parser)]
#[command(name = "topicchoice", version, about)]
struct Cli {
    /// TOML run configuration; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every stochastic stage (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 lets the runtime decide. Outputs do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Artifact directory (overrides `paths.workdir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Net,
    Logit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Greedy,
    Exhaustive,
    TopN,
}

impl From<MethodArg> for SlateMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Greedy => SlateMethod::Greedy,
            MethodArg::Exhaustive => SlateMethod::Exhaustive,
            MethodArg::TopN => SlateMethod::TopN,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster a `doc_id<TAB>tokens` corpus into topics.
    Cluster {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Tokenize raw text and drop stopwords first.
        #[arg(long)]
        raw: bool,
    },
    /// Generate a synthetic interaction log with known ground truth.
    Simulate {
        #[arg(long)]
        no_substitution: bool,
    },
    /// Turn an interaction log into train/validation/test instances.
    Prepare {
        #[arg(long)]
        log: Option<PathBuf>,
        /// Assignment file from `cluster`, used to relabel tweet topics.
        #[arg(long)]
        topics: Option<PathBuf>,
    },
    /// Train the choice-aware network and the per-topic logit baseline.
    Train,
    /// Report BCE, AUC and slate uplift on the test split.
    Evaluate {
        /// Simulation config whose ground truth joins the report.
        #[arg(long)]
        simulation: Option<PathBuf>,
    },
    /// Choose a topic slate for every test user.
    Optimize {
        #[arg(long, value_enum, default_value = "net")]
        model: ModelArg,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        /// Slate size (overrides `slate.n`).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Grid search over filters, batch size and learning rate.
    Sweep,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let root = cli
        .out
        .clone()
        .or_else(|| cfg.paths.workdir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let ctx = commands::Ctx {
        out: Workdir::create(root)?,
        cfg,
    };
    match cli.command {
        Command::Cluster { input, raw } => commands::cluster(&ctx, input, raw),
        Command::Simulate { no_substitution } => commands::simulate(&ctx, no_substitution),
        Command::Prepare { log, topics } => commands::prepare(&ctx, log, topics),
        Command::Train => commands::train(&ctx),
        Command::Evaluate { simulation } => commands::evaluate(&ctx, simulation),
        Command::Optimize { model, method, n } => commands::optimize(&ctx, model, method.map(Into::into), n),
        Command::Sweep => commands::sweep(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build();
    let result = match pool {
        Ok(pool) => pool.install(|| run(cli)),
        Err(e) => Err(CliError::Core(topicchoice::Error::Config(e.to_string()))),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
