mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use vidsum::eval::{Aggregation, Setting};
use vidsum::models::ModelKind;

/// Supervised sequence summarization: synthetic corpora, training,
/// summarization, evaluation and annotation conversion.
#[derive(Debug, Parser)]
#[command(name = "vidsum", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a teacher-labelled synthetic corpus.
    Synth(SynthArgs),
    /// Train a model on a split and evaluate it on the held-out videos.
    Train(TrainArgs),
    /// Write a budgeted summary per video with a trained checkpoint.
    Summarize(SummarizeArgs),
    /// Score summaries against the reference annotations.
    Eval(EvalArgs),
    /// Convert one annotation file between keyframes, keyshots and scores.
    Convert(ConvertArgs),
    /// Fit a covariance alignment from one dataset's features to another's.
    Adapt(AdaptArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Keyframes,
    Keyshots,
    Scores,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Seed for video layout and noise; defaults to --seed.
    #[arg(long)]
    pub video_seed: Option<u64>,
    #[arg(long, default_value = "synthetic")]
    pub name: String,
    #[arg(long, default_value_t = 50)]
    pub videos: usize,
    #[arg(long, default_value_t = 60)]
    pub min_frames: usize,
    #[arg(long, default_value_t = 200)]
    pub max_frames: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    #[arg(long, default_value_t = 16)]
    pub teacher_hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.0)]
    pub domain_shift: f64,
    #[arg(long, default_value_t = 2.0)]
    pub fps: f64,
    /// Output directory; defaults to a fresh run directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Dataset manifest; repeat for auxiliary datasets.
    #[arg(long = "manifest", required = true)]
    pub manifests: Vec<PathBuf>,
    /// Dataset to test on; defaults to the first manifest.
    #[arg(long)]
    pub target: Option<String>,
    /// canonical, augmented or transfer.
    #[arg(long, default_value = "canonical")]
    pub setting: Setting,
    /// Reuse a split written by an earlier run instead of drawing one.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// vslstm, dpplstm, dpplstm-single, mlp-shot or mlp-frame.
    #[arg(long, default_value = "vslstm")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 0.15)]
    pub budget: f64,
    #[arg(long, default_value_t = 2.0)]
    pub fps: f64,
    /// How scores against several annotators combine: mean or max.
    #[arg(long, default_value = "mean")]
    pub agg: Aggregation,
    /// Align auxiliary datasets to the target's feature covariance.
    #[arg(long, value_enum, default_value = "off")]
    pub adapt: Switch,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum epochs per stage (default 200).
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs of falling validation F before stopping; 0 never stops early.
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub momentum: Option<f64>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SummarizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Only summarize the test videos of this split.
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Feature transform applied before the model sees the videos.
    #[arg(long)]
    pub transform: Option<PathBuf>,
    #[arg(long, default_value_t = 0.15)]
    pub budget: f64,
    #[arg(long, default_value_t = 2.0)]
    pub fps: f64,
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// Directory of summaries written by `summarize`.
    #[arg(long)]
    pub summaries: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// How scores against several annotators combine: mean or max.
    #[arg(long, default_value = "mean")]
    pub agg: Aggregation,
    #[arg(long, default_value_t = 0.15)]
    pub budget: f64,
    #[arg(long, default_value_t = 2.0)]
    pub fps: f64,
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub to: Format,
    /// Sequence length; required unless the input holds scores.
    #[arg(long)]
    pub frames: Option<usize>,
    /// Segment start frames, comma separated, e.g. `0,2,4`.
    #[arg(long, value_delimiter = ',', conflicts_with = "segment_len")]
    pub boundaries: Option<Vec<usize>>,
    /// Uniform segment length when no boundaries are given.
    #[arg(long)]
    pub segment_len: Option<usize>,
    #[arg(long, default_value_t = 0.15)]
    pub budget: f64,
    /// Budget in frames; overrides --budget.
    #[arg(long)]
    pub budget_frames: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub output: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AdaptArgs {
    /// Manifest of the dataset whose features are transformed.
    #[arg(long)]
    pub source: PathBuf,
    /// Manifest of the dataset whose covariance is matched.
    #[arg(long)]
    pub target: PathBuf,
    /// Ridge added to both covariances; defaults to 1e-3 trace(C_s)/d.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(&a),
        Command::Train(a) => commands::train(&a),
        Command::Summarize(a) => commands::summarize(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Convert(a) => commands::convert(&a),
        Command::Adapt(a) => commands::adapt(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
