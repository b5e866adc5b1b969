use std::net::SocketAddr;
use std::path::PathBuf;

use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cnr_core::pipeline::ProducedAt;
use cnr_core::stats::Alternative;

#[derive(Debug, Parser)]
#[command(
    name = "cnr",
    version,
    about = "Comment-grounded news reading pipeline"
)]
pub struct Cli {
    /// Output style on standard output.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    pub format: Format,

    /// More log output on standard error (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    /// One JSON document per command, using the core model types.
    Structured,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate corpus files and add them to the data directory.
    Ingest(IngestArgs),
    /// Run the pipeline over stored articles.
    Process(ProcessArgs),
    /// Evaluation harness.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Start the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DataDir {
    #[arg(long, env = "CNR_DATA_DIR", default_value = "data")]
    pub data_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[command(flatten)]
    pub data: DataDir,
    /// Overwrite articles that are already stored.
    #[arg(long)]
    pub replace: bool,
}

#[derive(Debug, Args)]
pub struct BackendArgs {
    /// Base URL of an OpenAI-compatible endpoint.
    #[arg(long, env = "CNR_BACKEND_URL", conflicts_with = "scripted")]
    pub backend: Option<String>,
    /// Model name sent to the remote backend.
    #[arg(long, env = "CNR_MODEL", default_value = "gpt-4o-mini")]
    pub model: String,
    /// Replay responses from a script file instead of calling a model.
    #[arg(long)]
    pub scripted: Option<PathBuf>,
    /// Save every prompt/response pair to this script file.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Maximum backend calls in flight.
    #[arg(long, env = "CNR_CONCURRENCY", default_value_t = 4)]
    pub concurrency: usize,
}

#[derive(Debug, Args)]
pub struct ProcessArgs {
    /// Article ids to process.
    #[arg(conflicts_with = "all", required_unless_present = "all")]
    pub ids: Vec<String>,
    /// Process every stored article.
    #[arg(long)]
    pub all: bool,
    #[command(flatten)]
    pub data: DataDir,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// `now`, `created` (the article's timestamp) or an RFC 3339 time.
    /// Defaults to `created` with --scripted and `now` otherwise.
    #[arg(long, value_parser = parse_produced_at)]
    pub produced_at: Option<ProducedAt>,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// Score the classifiers against a labelled gold file.
    Classify(EvalClassifyArgs),
    /// Gwet's AC1 between two rater files.
    Agreement(EvalAgreementArgs),
    /// Wilcoxon signed-rank table over paired with/without-comments scores.
    Ablation(EvalAblationArgs),
    /// Hints for one processed article with and without comments, for raters.
    Hints(EvalHintsArgs),
}

#[derive(Debug, Args)]
pub struct EvalClassifyArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Exit nonzero when any classifier misses the accuracy or F1 gate.
    #[arg(long)]
    pub require_gates: bool,
}

#[derive(Debug, Args)]
pub struct EvalAgreementArgs {
    #[arg(long)]
    pub rater_a: PathBuf,
    #[arg(long)]
    pub rater_b: PathBuf,
    /// Full label space, comma-separated. Defaults to the labels seen.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<String>,
}

#[derive(Debug, Args)]
pub struct EvalAblationArgs {
    #[arg(long)]
    pub paired_scores: PathBuf,
    #[arg(long, default_value = "two-sided", value_parser = parse_alternative)]
    pub alternative: Alternative,
}

#[derive(Debug, Args)]
pub struct EvalHintsArgs {
    #[arg(long)]
    pub article: String,
    #[command(flatten)]
    pub data: DataDir,
    #[command(flatten)]
    pub backend: BackendArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "CNR_ADDR", default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[command(flatten)]
    pub data: DataDir,
    #[command(flatten)]
    pub backend: BackendArgs,
    /// Directory of built UI assets to serve at `/`.
    #[arg(long)]
    pub static_dir: Option<PathBuf>,
    /// Allowed browser origin for the UI; any when unset.
    #[arg(long, env = "CNR_CORS_ORIGIN")]
    pub cors_origin: Option<String>,
    #[arg(long, value_parser = parse_produced_at)]
    pub produced_at: Option<ProducedAt>,
}

fn parse_produced_at(raw: &str) -> Result<ProducedAt, String> {
    match raw {
        "now" => Ok(ProducedAt::Now),
        "created" => Ok(ProducedAt::ArticleCreated),
        other => DateTime::parse_from_rfc3339(other)
            .map(|t| ProducedAt::Fixed(t.with_timezone(&Utc)))
            .map_err(|e| format!("expected now, created or RFC 3339: {e}")),
    }
}

fn parse_alternative(raw: &str) -> Result<Alternative, String> {
    raw.parse()
}
