//! `dialclean`: preprocessing, chunking, the annotation service, aggregation
//! and detection pipelines from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 detector or protocol failure. Errors are printed to stderr as one JSON
//! object.

mod commands;
mod config;
mod error;
mod output;
mod serve;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::ConfigArgs;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "dialclean", version, about = "Transcript cleanup toolkit")]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Strip disfluency markup from raw transcripts.
    Preprocess(PreprocessArgs),
    /// Split conversations into annotation HITs.
    Chunk(ChunkArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Export best-worker labels and analytics from a service data directory.
    Aggregate(AggregateArgs),
    /// Per-turn Fleiss' kappa between annotators.
    Kappa(KappaArgs),
    /// Run a cleanup pipeline over conversations.
    Detect(DetectArgs),
    /// Token-level precision, recall and F1 of predictions against gold.
    Evaluate(EvaluateArgs),
    /// Corpus statistics.
    Stats(StatsArgs),
}

#[derive(Debug, clap::Args, Serialize)]
pub struct PreprocessArgs {
    /// Raw transcripts, one JSON object per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Cleaned conversations.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-unit record of kept and removed spans.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Marker-stripped conversations with disfluencies still in place.
    #[arg(long)]
    pub full_output: Option<PathBuf>,
    /// Disfluency labels on the full conversations.
    #[arg(long)]
    pub disfluency_gold_output: Option<PathBuf>,
    /// Multi-turn gold labeled on the cleaned conversations.
    #[arg(long)]
    pub mtd_gold: Option<PathBuf>,
    /// Multi-turn gold moved onto the full conversations.
    #[arg(long, requires = "mtd_gold")]
    pub mtd_gold_output: Option<PathBuf>,
    /// Disfluency and multi-turn gold joined on the full conversations.
    #[arg(long, requires = "mtd_gold")]
    pub union_gold_output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct ChunkArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// HITs, one per line.
    #[arg(long)]
    pub output: PathBuf,
    /// `POST /v1/batches` body with the conversations and HITs.
    #[arg(long, requires = "batch_id")]
    pub batch_output: Option<PathBuf>,
    #[arg(long)]
    pub batch_id: Option<String>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct ServeArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub bind: String,
    #[arg(long, env = "DIALCLEAN_PORT", default_value_t = 8080)]
    pub port: u16,
    /// Qualification HIT: a conversation, its gold labels and optionally the
    /// chunk to show.
    #[arg(long)]
    pub qualification: Option<PathBuf>,
    #[arg(long, default_value_t = dialclean_service::settings::DEFAULT_LEASE_SECONDS)]
    pub lease_seconds: u64,
    /// Seeds checkpoint placement.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Events between snapshots; 0 disables automatic snapshots.
    #[arg(long, default_value_t = dialclean_service::settings::DEFAULT_SNAPSHOT_EVERY)]
    pub snapshot_every: usize,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct AggregateArgs {
    #[arg(long)]
    pub data_dir: PathBuf,
    /// Aggregated label sets, one per conversation.
    #[arg(long)]
    pub output: PathBuf,
    /// Per-turn provenance, unlabeled turns and corpus stats.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub analytics: Option<PathBuf>,
    #[arg(long)]
    pub analytics_csv: Option<PathBuf>,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct KappaArgs {
    /// Read conversations, HITs and annotations from a service data directory.
    #[arg(long, conflicts_with_all = ["input", "hits", "annotations"])]
    pub data_dir: Option<PathBuf>,
    #[arg(long, requires_all = ["hits", "annotations"])]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub hits: Option<PathBuf>,
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
    /// Every rater's labels per turn.
    #[arg(long)]
    pub ratings_output: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    TwoStage,
    Combined,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct DetectArgs {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Single-turn detector: `oracle`, `heuristic:NAME` or `external:COMMAND`.
    #[arg(long)]
    pub std: Option<String>,
    /// Multi-turn detector (the only detector in combined mode).
    #[arg(long)]
    pub mtd: String,
    #[arg(long)]
    pub input: PathBuf,
    /// Predicted label sets, one per conversation.
    #[arg(long)]
    pub output: PathBuf,
    /// Gold for an oracle single-turn detector.
    #[arg(long)]
    pub std_gold: Option<PathBuf>,
    /// Gold for an oracle multi-turn detector. In combined mode the oracle
    /// uses the union of both gold files.
    #[arg(long)]
    pub mtd_gold: Option<PathBuf>,
    /// Labels from each stage (two-stage mode only).
    #[arg(long)]
    pub stages_output: Option<PathBuf>,
    /// Cleaned transcripts as `{"conv_id", "text"}` lines.
    #[arg(long)]
    pub clean_text: Option<PathBuf>,
    /// Full transcripts with removals bracketed by category.
    #[arg(long)]
    pub marked_text: Option<PathBuf>,
    /// Lexicon for heuristic detectors, one entry per line.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Reply timeout for external detectors.
    #[arg(long)]
    pub timeout_seconds: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, clap::Args, Serialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Label sets whose removals are counted per category.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// HITs counted per split.
    #[arg(long)]
    pub hits: Option<PathBuf>,
    #[arg(long)]
    pub output: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = cli.config.resolve()?;
    match cli.command {
        Command::Preprocess(a) => commands::preprocess(&a, &cfg),
        Command::Chunk(a) => commands::chunk(&a, &cfg),
        Command::Serve(a) => serve::serve(&a, &cfg),
        Command::Aggregate(a) => commands::aggregate(&a, &cfg),
        Command::Kappa(a) => commands::kappa(&a, &cfg),
        Command::Detect(a) => commands::detect(&a, &cfg),
        Command::Evaluate(a) => commands::evaluate(&a, &cfg),
        Command::Stats(a) => commands::stats(&a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let message = e.render().to_string();
            eprintln!("{}", CliError::usage(message.trim()).to_json());
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
