use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Find and mitigate rare subclasses in a small feed-forward classifier
/// using penultimate-layer commonality scores.
#[derive(Debug, Parser, Serialize)]
#[command(name = "rarity", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Train a parity classifier on an MNIST directory.
    Train(TrainCmd),
    /// Build the cumulative activation matrix over a data split.
    Matrix(MatrixCmd),
    /// Score every sample of a split and write the score table.
    Score(ScoreCmd),
    /// Misclassification rate of Tukey outliers versus all samples.
    Outliers(OutliersCmd),
    /// Misclassification rate per score decile.
    Deciles(DecilesCmd),
    /// Lowest and highest scoring samples per predicted class, with montages.
    Extremes(ExtremesCmd),
    /// Drop samples of one digit from the training split.
    Rarify(RarifyCmd),
    /// Append copies of selected training samples.
    Oversample(OversampleCmd),
    /// Build or apply a run-time trust monitor.
    #[command(subcommand)]
    Monitor(MonitorCmd),
    /// Repeated rarefy-train-evaluate trials and per-digit rarity ratios.
    RarityExperiment(RarityExperimentCmd),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Test,
}

impl From<SplitArg> for rarity_core::datasets::Split {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Train => Self::Train,
            SplitArg::Test => Self::Test,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisArg {
    #[value(name = "training")]
    TrainingScores,
    #[value(name = "test")]
    TestScores,
}

#[derive(Debug, Args, Serialize)]
pub struct Hyper {
    /// Layer widths from input to output, e.g. 784,100,2.
    #[arg(long, value_delimiter = ',', default_value = "784,100,2")]
    pub arch: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainCmd {
    /// Directory with the four MNIST files (optionally .gz).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub hyper: Hyper,
}

#[derive(Debug, Args, Serialize)]
pub struct MatrixCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub matrix: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Score CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct OutliersCmd {
    /// Score CSV of the samples to analyse.
    #[arg(long)]
    pub scores: PathBuf,
    /// Score CSV the threshold is fitted on; defaults to --scores.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, default_value_t = rarity_core::activation::DEFAULT_K_FENCE)]
    pub k_fence: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DecilesCmd {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ExtremesCmd {
    #[arg(long)]
    pub scores: PathBuf,
    /// MNIST directory holding the images the scores refer to.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Samples per list.
    #[arg(long, default_value_t = rarity_core::experiments::DEFAULT_EXTREMES_COUNT)]
    pub count: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RarifyCmd {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=9))]
    pub digit: u8,
    /// Drop probability.
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output MNIST directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct OversampleCmd {
    #[arg(long)]
    pub data: PathBuf,
    /// CSV with a sample_id column naming training samples to copy.
    #[arg(long)]
    pub ids: PathBuf,
    /// Keep only rows whose subclass column equals this digit.
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=9))]
    pub digit: Option<u8>,
    /// Keep only the K lowest-scoring rows (needs a score column).
    #[arg(long)]
    pub lowest: Option<usize>,
    /// Copies to append.
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output MNIST directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "action", rename_all = "kebab-case")]
pub enum MonitorCmd {
    /// Fit a threshold and write a monitor file.
    Build(MonitorBuildCmd),
    /// Accept or refer each sample of a split.
    Assess(MonitorAssessCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct MonitorBuildCmd {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub matrix: PathBuf,
    /// MNIST directory providing the reference scores.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "training")]
    pub basis: BasisArg,
    #[arg(long, default_value_t = rarity_core::activation::DEFAULT_K_FENCE)]
    pub k_fence: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MonitorAssessCmd {
    #[arg(long)]
    pub monitor: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Assess one sample and print its verdict.
    #[arg(long)]
    pub sample: Option<u64>,
    /// Verdict CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RarityExperimentCmd {
    #[arg(long)]
    pub data: PathBuf,
    /// Digits to rarefy; all ten by default.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u8).range(0..=9))]
    pub digit: Vec<u8>,
    #[arg(long, default_value_t = 30)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.8)]
    pub p: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub hyper: Hyper,
}
