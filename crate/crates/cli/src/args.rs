use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lsuss_core::autoenc::ArchKind;
use lsuss_core::eval::ExtractorKind;
use lsuss_core::pipeline::Algorithm;
use lsuss_core::series::ScalerKind;

#[derive(Debug, Parser)]
#[command(name = "lsuss", version, about = "Unsupervised change-point detection for multichannel time series")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Seed for every random draw (default 0).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "LSUSS_THREADS")]
    pub threads: Option<usize>,
    #[arg(long, global = true, default_value = "warn")]
    pub log_level: log::LevelFilter,
    /// JSON file with base settings, applied before flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// `key=value` override applied last; dotted keys reach nested fields
    /// and values are read as JSON when they parse.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an autoencoder on the training split.
    Train(TrainArgs),
    /// Segment a series offline.
    Segment(SegmentArgs),
    /// Replay a series as a stream and print emissions as they finalize.
    Stream(StreamArgs),
    /// Score predicted change-points against ground truth.
    Eval(EvalArgs),
    /// Rank pipeline configurations on the validation split.
    Gridsearch(GridArgs),
    /// Write a synthetic series with its labels.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DataFormat {
    Auto,
    Delimited,
    Uci,
    EmgArtificial,
    EmgEvaluation,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Delimited file (labels in `<stem>.cps`) or dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = DataFormat::Auto)]
    pub format: DataFormat,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    /// Stride between training windows.
    #[arg(long, default_value_t = 1)]
    pub train_step: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "fc")]
    pub arch: ArchKind,
    #[arg(long)]
    pub nw: usize,
    #[arg(long, default_value = "standard")]
    pub scaler: ScalerKind,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
}

/// Pipeline flags; unset ones fall back to the config file, the model, then
/// library defaults.
#[derive(Debug, Args, Default)]
pub struct PipelineArgs {
    #[arg(long)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub nw: Option<usize>,
    #[arg(long)]
    pub tc: Option<usize>,
    #[arg(long)]
    pub step: Option<usize>,
    #[arg(long)]
    pub scaler: Option<ScalerKind>,
    #[arg(long)]
    pub arch: Option<ArchKind>,
    /// Known change-point count; selects REA (or LREA with `--extractor lrea`).
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub extractor: Option<ExtractorKind>,
    #[arg(long)]
    pub local_window: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub epsilon_batch: Option<usize>,
    #[arg(long)]
    pub t_lim: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Trained autoencoder; its scaler sidecar is used when present.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Change-point output, one index per line.
    #[arg(long)]
    pub out: PathBuf,
    /// Curve output (`index,value` CSV).
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Stop after this many samples without finalizing the tail.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Final change-points, one index per line.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Finalized CAC prefix.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    ScoreRegimes,
    PredictionLossMae,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WeightingArg {
    Literal,
    OnePlus,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Predicted change-points, one index per line.
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground-truth change-points (`.cps`).
    #[arg(long)]
    pub gt: PathBuf,
    /// Series length.
    #[arg(long, required_unless_present = "data")]
    pub n: Option<usize>,
    /// Series the labels belong to; supplies `n`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricArg::ScoreRegimes)]
    pub metric: MetricArg,
    #[arg(long, value_enum, default_value_t = WeightingArg::Literal)]
    pub weighting: WeightingArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Grid specification (JSON with `axes`, `budget`, `seed`).
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = WeightingArg::Literal)]
    pub weighting: WeightingArg,
    /// Split the configurations are scored on.
    #[arg(long, value_enum, default_value_t = EvalSplit::Val)]
    pub eval_split: EvalSplit,
    #[command(flatten)]
    pub fit: FitArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalSplit {
    Val,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    TwoRegime,
    RedundantSuite,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// SynthSpec JSON; `--seed` overrides its seed when given explicitly.
    #[arg(long, conflicts_with = "preset")]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    /// Series output; labels go next to it with a `.cps` suffix.
    #[arg(long)]
    pub out: PathBuf,
}
