use std::path::PathBuf;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogFormat {
    Text,
    /// One JSON object per line.
    Json,
}

/// Volcanic ash cloud delimitation with a conditional GAN.
#[derive(Debug, Parser)]
#[command(name = "ashgan", version, arg_required_else_help = true)]
pub struct Cli {
    /// TOML configuration file with [dataset], [train], [evaluate],
    /// [predict] and [synth] sections.
    #[arg(long, global = true, env = "ASHGAN_CONFIG")]
    pub config: Option<PathBuf>,

    /// Increase log detail (-v debug, -vv trace).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    pub verbose: u8,

    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    pub quiet: bool,

    /// Format of the log on stderr.
    #[arg(long, global = true, value_enum, default_value_t = LogFormat::Text)]
    pub log_format: LogFormat,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resize, combine and split image pairs into a prepared dataset.
    Prepare(PrepareArgs),
    /// Compute a stratified train/val/test manifest.
    Split(SplitArgs),
    /// Train the generator and discriminator.
    Train(TrainArgs),
    /// Plot training curves, compare checkpoints, score masks.
    Evaluate(EvaluateArgs),
    /// Predict the ash mask of one image.
    Predict(PredictArgs),
    /// Predict masks for every image in a directory.
    PredictBatch(PredictBatchArgs),
    /// Generate a procedural paired dataset.
    Synth(SynthArgs),
    /// Print layer shapes, parameter counts and receptive fields.
    Audit(AuditArgs),
}


#[derive(Debug, Args)]
pub struct ArchArgs {
    /// Architecture JSON file (as written by `audit --write-arch`).
    #[arg(long, env = "ASHGAN_ARCH")]
    pub arch: Option<PathBuf>,
    /// Input size of the scaled architecture, when no file is given.
    #[arg(long, env = "ASHGAN_SIZE")]
    pub size: Option<usize>,
    /// Divides every filter count of the scaled architecture.
    #[arg(long, env = "ASHGAN_WIDTH_DIVISOR")]
    pub width_divisor: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long, env = "ASHGAN_SOURCE_DIR")]
    pub source_dir: Option<PathBuf>,
    #[arg(long, env = "ASHGAN_TARGET_DIR")]
    pub target_dir: Option<PathBuf>,
    /// CSV with `filename,satellite` columns; otherwise the filename prefix decides.
    #[arg(long, env = "ASHGAN_SATELLITE_CSV")]
    pub satellite_csv: Option<PathBuf>,
    #[arg(long, env = "ASHGAN_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    /// Reuse an existing split manifest instead of computing one.
    #[arg(long, env = "ASHGAN_MANIFEST")]
    pub manifest: Option<PathBuf>,
    #[arg(long, env = "ASHGAN_SEED")]
    pub seed: Option<u64>,
    /// Train, validation and test fractions.
    #[arg(long, env = "ASHGAN_FRACTIONS", value_name = "TRAIN,VAL,TEST")]
    pub fractions: Option<String>,
    /// Store combined images as PNG instead of JPEG (quality 95).
    #[arg(long, env = "ASHGAN_LOSSLESS", num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub lossless: Option<bool>,
    /// Side length of each half of the combined image.
    #[arg(long, env = "ASHGAN_SIZE")]
    pub size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long, env = "ASHGAN_SOURCE_DIR")]
    pub source_dir: Option<PathBuf>,
    #[arg(long, env = "ASHGAN_TARGET_DIR")]
    pub target_dir: Option<PathBuf>,
    #[arg(long, env = "ASHGAN_SATELLITE_CSV")]
    pub satellite_csv: Option<PathBuf>,
    /// Split placeholder strata instead of files, e.g. `GOES16=148,GOES17=401`.
    #[arg(long, conflicts_with_all = ["source_dir", "target_dir"])]
    pub strata: Option<String>,
    #[arg(long, env = "ASHGAN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "ASHGAN_FRACTIONS", value_name = "TRAIN,VAL,TEST")]
    pub fractions: Option<String>,
    /// Manifest path; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Prepared dataset directory (contains manifest.json).
    #[arg(long, env = "ASHGAN_DATASET_DIR")]
    pub dataset_dir: Option<PathBuf>,
    #[arg(long, env = "ASHGAN_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long, env = "ASHGAN_EPOCHS")]
    pub epochs: Option<usize>,
    #[arg(long, env = "ASHGAN_BATCH_SIZE")]
    pub batch_size: Option<usize>,
    #[arg(long, env = "ASHGAN_LR")]
    pub lr: Option<f32>,
    #[arg(long, env = "ASHGAN_ADAM_BETA1")]
    pub adam_beta1: Option<f32>,
    #[arg(long, env = "ASHGAN_LAMBDA_L1")]
    pub lambda_l1: Option<f32>,
    #[arg(long, env = "ASHGAN_CHECKPOINT_EVERY")]
    pub checkpoint_every: Option<usize>,
    #[arg(long, env = "ASHGAN_SEED")]
    pub seed: Option<u64>,
    /// Continue from the latest checkpoint in the output directory.
    #[arg(long, env = "ASHGAN_RESUME", num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub resume: Option<bool>,
    /// Pairs shown in each progress grid.
    #[arg(long)]
    pub progress_samples: Option<usize>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Training output directory (metrics.csv, checkpoints/).
    #[arg(long)]
    pub run_dir: Option<PathBuf>,
    /// Prepared dataset whose test pairs feed the checkpoint comparison.
    #[arg(long, env = "ASHGAN_DATASET_DIR")]
    pub dataset_dir: Option<PathBuf>,
    /// Directory of predicted masks to score.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Ground truth CSV with `id,has_ash` columns.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Score explicit counts instead, e.g. `23,0,7,0`.
    #[arg(long, value_name = "TP,FP,FN,TN")]
    pub confusion: Option<String>,
    #[arg(long, env = "ASHGAN_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, env = "ASHGAN_ARCH")]
    pub arch: Option<PathBuf>,
    /// Pixels darker than this count as ash.
    #[arg(long, env = "ASHGAN_THRESHOLD_LUMINANCE")]
    pub threshold_luminance: Option<f64>,
    /// Minimum fraction of dark pixels for a mask to show ash.
    #[arg(long, env = "ASHGAN_THRESHOLD_FRACTION")]
    pub threshold_fraction: Option<f64>,
    /// Report undefined metrics as 0.
    #[arg(long, env = "ASHGAN_PAPER_COMPAT", num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub paper_compat: Option<bool>,
    /// Pairs per checkpoint comparison grid.
    #[arg(long)]
    pub compare_samples: Option<usize>,
    /// Dropout seed for the comparison grids.
    #[arg(long, env = "ASHGAN_SEED")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// Generator weights file (`model_epoch_N.weights`).
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub common: PredictCommon,
}

#[derive(Debug, Args)]
pub struct PredictBatchArgs {
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub common: PredictCommon,
}

#[derive(Debug, Args)]
pub struct PredictCommon {
    /// Architecture file; defaults to the run's architecture.json.
    #[arg(long, env = "ASHGAN_ARCH")]
    pub arch: Option<PathBuf>,
    /// Seed of the inference-time dropout.
    #[arg(long, env = "ASHGAN_SEED")]
    pub seed: Option<u64>,
    /// Disable dropout at inference.
    #[arg(long, env = "ASHGAN_NO_DROPOUT", num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub no_dropout: Option<bool>,
    /// Write JPEG masks instead of PNG.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", require_equals = true)]
    pub jpeg: Option<bool>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, env = "ASHGAN_SYNTH_COUNT")]
    pub count: Option<usize>,
    #[arg(long, env = "ASHGAN_SEED")]
    pub seed: Option<u64>,
    #[arg(long, env = "ASHGAN_OUT_DIR")]
    pub out: Option<PathBuf>,
    #[arg(long, env = "ASHGAN_SIZE")]
    pub size: Option<usize>,
    #[arg(long)]
    pub min_blobs: Option<usize>,
    #[arg(long)]
    pub max_blobs: Option<usize>,
    /// Relative frequency of GOES16, GOES17, HIMAWARI8, METEOSAT11.
    #[arg(long, value_name = "W1,W2,W3,W4")]
    pub satellite_weights: Option<String>,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[command(flatten)]
    pub arch: ArchArgs,
    /// Emit JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Also write the audited architecture to this file.
    #[arg(long)]
    pub write_arch: Option<PathBuf>,
}
