//! `claimmatch` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration error, 3 provider failure,
//! 4 data validation failure.

mod commands;
mod failure;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tracing_subscriber::EnvFilter;

use claimmatch::runner::{ShotMode, ShotsSource};
use claimmatch::templates::QuestionPosition;

#[derive(Debug, Parser)]
#[command(
    name = "claimmatch",
    version,
    about = "Claim matching with prompted LLMs and an embedding baseline"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// TOML file with [provider] and/or [embedder] tables.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for sampling, negative generation and shot order.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Also copy the run transcript to this path.
    #[arg(long, global = true, conflicts_with = "replay")]
    pub record: Option<PathBuf>,
    /// Answer from a recorded transcript instead of a live provider (for
    /// `sweep`: a results directory holding <run_id>/transcript.jsonl).
    #[arg(long, global = true)]
    pub replay: Option<PathBuf>,
    /// Maximum in-flight provider requests.
    #[arg(long, global = true, default_value_t = claimmatch::runner::DEFAULT_CONCURRENCY)]
    pub concurrency: usize,
    /// Flip negative answers that describe the claims as the same event up to
    /// minor details.
    #[arg(long, global = true)]
    pub relabel_same_event: bool,
    /// Root of the results directory.
    #[arg(long, global = true, default_value = "results")]
    pub results_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a balanced claim-pair dataset from gold links and raw claims.
    BuildDataset(BuildDatasetArgs),
    /// Calibrate the similarity threshold on validation positives.
    Calibrate(CalibrateArgs),
    /// Run one prompting experiment.
    Run(RunArgs),
    /// Run a grid of templates, instruction modes and shot settings.
    Sweep(SweepArgs),
    /// Classify pairs with the similarity baseline.
    Baseline(BaselineArgs),
    /// Score a predictions file against gold pairs.
    Evaluate(EvaluateArgs),
    /// Mean and standard error over repeated runs.
    Aggregate(AggregateArgs),
    /// Comparison table over all runs in the results directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct BuildDatasetArgs {
    /// Gold links, JSONL of {"input_id","verified_id"}.
    #[arg(long)]
    pub positives: PathBuf,
    /// Raw claims, JSONL: input claims plus the verified-claim pool that
    /// negatives are drawn from.
    #[arg(long)]
    pub pool: PathBuf,
    /// Drop positive pairs more similar than this to an earlier kept pair.
    #[arg(long)]
    pub dedup_ratio: Option<f64>,
    /// Random sample of positives taken before deduplication.
    #[arg(long)]
    pub pre_sample: Option<usize>,
    /// Final number of positives (and of negatives).
    #[arg(long)]
    pub n_positives: Option<usize>,
    /// Split written into every pair.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Pair files whose claims must not be reused (e.g. the test set when
    /// building shots).
    #[arg(long)]
    pub exclude: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub stats_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Validation pairs (JSONL); only positives are used.
    #[arg(long)]
    pub validation: PathBuf,
    /// Embedding model name; `hash` (or `hash-*`) is an offline mock.
    #[arg(long)]
    pub embedder: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentOpts {
    /// Test pairs (JSONL).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Domain-independent few-shot examples (JSONL).
    #[arg(long)]
    pub shots: Option<PathBuf>,
    /// In-domain few-shot examples (JSONL).
    #[arg(long)]
    pub in_domain_shots: Option<PathBuf>,
    #[arg(long, value_parser = parse_shots_source, default_value = "domain-independent")]
    pub shots_source: ShotsSource,
    #[arg(long, value_parser = parse_position, default_value = "trailing")]
    pub position: QuestionPosition,
    /// Model name when no config file is given (e.g. for replay).
    #[arg(long)]
    pub model: Option<String>,
    /// Sampling preset used with --model: llama, mistral or api-default.
    #[arg(long, default_value = "api-default")]
    pub preset: String,
    /// Skip pairs whose requests fail instead of aborting.
    #[arg(long)]
    pub lenient: bool,
    /// Offline provider that answers each pair's gold label.
    #[arg(long)]
    pub echo_gold: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub exp: ExperimentOpts,
    #[arg(long, default_value = "PD-6")]
    pub template: String,
    /// System template for ensemble instructions.
    #[arg(long)]
    pub system_template: Option<String>,
    #[arg(long, value_parser = parse_shot_mode, default_value = "zero")]
    pub shot_mode: ShotMode,
    #[arg(long)]
    pub run_id: Option<String>,
    /// Replay a persisted run from its manifest.json instead.
    #[arg(long, conflicts_with_all = ["dataset", "template"])]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub exp: ExperimentOpts,
    /// Comma-separated user templates, or `all`.
    #[arg(long, default_value = "all")]
    pub templates: String,
    /// Comma-separated system templates; `none` means single instruction.
    #[arg(long, default_value = "none")]
    pub system_templates: String,
    /// Comma-separated shot modes.
    #[arg(long, default_value = "zero,few")]
    pub shot_modes: String,
    #[arg(long, default_value = "sweep")]
    pub run_id: String,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// Threshold JSON written by `calibrate`.
    #[arg(long)]
    pub threshold: PathBuf,
    /// Embedding model; defaults to the threshold's model.
    #[arg(long)]
    pub embedder: Option<String>,
    #[arg(long)]
    pub run_id: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub preds: PathBuf,
    #[arg(long)]
    pub gold: PathBuf,
    /// Write the report JSON here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// metrics.json files of repeated runs.
    #[arg(required = true)]
    pub metrics: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Write the table here as well.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_shot_mode(s: &str) -> Result<ShotMode, String> {
    s.parse()
}

fn parse_shots_source(s: &str) -> Result<ShotsSource, String> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "domain-independent" | "short" => Ok(ShotsSource::DomainIndependent),
        "in-domain" => Ok(ShotsSource::InDomain),
        other => Err(format!(
            "unknown shots source {other:?} (domain-independent or in-domain)"
        )),
    }
}

fn parse_position(s: &str) -> Result<QuestionPosition, String> {
    match s.to_ascii_lowercase().as_str() {
        "trailing" => Ok(QuestionPosition::Trailing),
        "leading" => Ok(QuestionPosition::Leading),
        other => Err(format!(
            "unknown question position {other:?} (trailing or leading)"
        )),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    match commands::dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.class.code())
        }
    }
}
