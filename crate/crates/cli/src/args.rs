//! Command-line surface. Subcommands cover the full workflow: ingestion,
//! synthetic data, training, evaluation, sweeps, report rendering, and
//! annotator agreement.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "rehab-assess",
    version,
    about = "Assesses rehabilitation exercise executions from skeleton motion sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Verbose logging on the error stream.
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a dataset manifest and print a per-exercise summary.
    Ingest(IngestArgs),
    /// Generate a labeled synthetic dataset.
    Generate(GenerateArgs),
    /// Fit a movement model per exercise and calibrate its threshold.
    TrainGmm(TrainArgs),
    /// Train a spatio-temporal graph classifier per exercise.
    TrainStgcn(TrainArgs),
    /// Score a labeled dataset with previously trained models.
    Evaluate(EvaluateArgs),
    /// Run a training-set-size sweep and emit report files.
    Sweep(SweepArgs),
    /// Recompute aggregates, summary, and plots from a report table.
    Report(ReportArgs),
    /// Inter-annotator agreement (Cohen's kappa, Krippendorff's alpha).
    Agreement(AgreementArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Dataset manifest path.
    #[arg(long)]
    pub data: PathBuf,

    /// Require this skeleton format (kinect_v2, openpose, blazepose, custom).
    #[arg(long)]
    pub format: Option<String>,

    /// Re-emit validated sequence documents and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Generator spec (JSON); defaults apply when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,

    /// Output directory for sequence documents and the manifest.
    #[arg(long)]
    pub out: PathBuf,

    /// Override the generator seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Correct executions per exercise.
    #[arg(long)]
    pub correct: Option<usize>,

    /// Incorrect executions per exercise.
    #[arg(long)]
    pub incorrect: Option<usize>,

    /// Comma-separated exercise names.
    #[arg(long, value_delimiter = ',')]
    pub exercises: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset manifest path.
    #[arg(long)]
    pub data: PathBuf,

    /// Training spec (JSON); defaults apply when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,

    /// Output directory for model files.
    #[arg(long)]
    pub out: PathBuf,

    /// Require this skeleton format.
    #[arg(long)]
    pub format: Option<String>,

    /// Override the training seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Dataset manifest path (labeled evaluation data).
    #[arg(long)]
    pub data: PathBuf,

    /// Training output directory holding model files and their
    /// resolved_config.json.
    #[arg(long)]
    pub model: PathBuf,

    /// Expected algorithm (gmm, stgcn); checked against the model directory.
    #[arg(long)]
    pub algorithm: Option<String>,

    /// Write predictions.csv and metrics.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Dataset manifest path.
    #[arg(long)]
    pub data: PathBuf,

    /// Sweep spec (JSON, required); a resolved_config.json from an earlier
    /// run is accepted and replayed.
    #[arg(long)]
    pub spec: PathBuf,

    /// Output directory for report files.
    #[arg(long)]
    pub out: PathBuf,

    /// Worker threads (default: all processors).
    #[arg(long)]
    pub jobs: Option<usize>,

    /// Override the sweep base seed.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Override the algorithm (gmm, stgcn).
    #[arg(long)]
    pub algorithm: Option<String>,

    /// Override the skeleton format.
    #[arg(long)]
    pub format: Option<String>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Existing report table (report.csv).
    #[arg(long)]
    pub data: PathBuf,

    /// Output directory for the regenerated files.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AgreementArgs {
    /// Dataset manifest path (sequences with per-annotator labels).
    #[arg(long)]
    pub data: PathBuf,

    /// Write agreement.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
