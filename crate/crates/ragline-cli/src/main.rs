//! `ragline` — command-line front end for the retrieval-augmented
//! generation pipeline: ingest a corpus, build the vector index, query it,
//! generate grounded answers, score graded outputs, and sweep retrieval
//! parameters.
//!
//! Exit codes: 0 success, 1 input/config error, 2 index/embedder
//! mismatch, 3 provider failure. `--json` switches every command from
//! human-readable text to a machine-readable document matching the
//! schemas shipped under `schemas/`.

mod commands;
mod config;
mod lock;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use ragline::chunker::ChunkerError;
use ragline::corpus::CorpusError;
use ragline::embedder::EmbedError;
use ragline::evaluator::EvalError;
use ragline::generator::GenerateError;
use ragline::retriever::RetrieveError;
use ragline::vector_store::StoreError;

/// Failure classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad input or configuration (exit 1).
    Input(String),
    /// Query embedder disagrees with the index (exit 2).
    Mismatch(String),
    /// A remote provider failed (exit 3).
    Provider(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Mismatch(_) => 2,
            CliError::Provider(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Mismatch(m) | CliError::Provider(m) => m,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<ChunkerError> for CliError {
    fn from(e: ChunkerError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<StoreError> for CliError {
    fn from(e: StoreError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            // A failing embeddings service is a provider problem; a missing
            // key or bad dimensions is the operator's.
            EmbedError::Service(_) => CliError::Provider(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<RetrieveError> for CliError {
    fn from(e: RetrieveError) -> Self {
        match e {
            RetrieveError::FingerprintMismatch { .. } => CliError::Mismatch(e.to_string()),
            RetrieveError::Store(StoreError::DimMismatch { .. }) => {
                CliError::Mismatch(e.to_string())
            }
            RetrieveError::Embed(embed) => embed.into(),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<GenerateError> for CliError {
    fn from(e: GenerateError) -> Self {
        match e {
            GenerateError::Service(_) | GenerateError::Malformed(_) => {
                CliError::Provider(e.to_string())
            }
            other => CliError::Input(other.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "ragline",
    version,
    about = "Retrieval-augmented generation pipeline: ingest, index, query, ask, score, sweep"
)]
struct Cli {
    /// Configuration file (default: ./ragline.toml when present).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the corpus, split it into chunks, and write a chunk dump.
    Ingest(commands::IngestArgs),
    /// Build (or atomically rebuild) the vector index from the corpus.
    Index(commands::IndexArgs),
    /// Retrieve the top-k chunks for a query string.
    Query(commands::QueryArgs),
    /// Assemble a grounded prompt for a scenario file and get a completion.
    Ask(commands::AskArgs),
    /// Compute accuracy, hallucination, and comparison statistics from graded responses.
    Score(commands::ScoreArgs),
    /// Grid-search chunk size and k against a retrieval evaluation set.
    Sweep(commands::SweepArgs),
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = config::PipelineConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest(args) => commands::ingest(&config, args),
        Command::Index(args) => commands::index(&config, args),
        Command::Query(args) => commands::query(&config, args),
        Command::Ask(args) => commands::ask(&config, args),
        Command::Score(args) => commands::score(&config, args),
        Command::Sweep(args) => commands::sweep(&config, args),
    }
}

fn main() {
    // Die quietly when a downstream pipe closes (e.g. `ragline ... | head`)
    // instead of panicking on the failed write.
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::init();

    // clap exits 2 for usage errors by default; this tool reserves 2 for
    // index/embedder mismatches, so usage problems are remapped to 1.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };

    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message());
        std::process::exit(e.code());
    }
}
