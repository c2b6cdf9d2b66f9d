use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tss_core::noise::{NoiseKind, NoiseScope};
use tss_core::tss::PacingKind;

#[derive(Parser, Debug)]
#[command(name = "tss", version, about = "Centrality-sorted curriculum training under label noise")]
pub struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a stochastic block model graph.
    Gen(GenArgs),
    /// Corrupt labels and audit the result.
    Corrupt(CorruptArgs),
    /// Score nodes by class-conditional betweenness.
    Cbc(CbcArgs),
    /// Train a classifier with plain cross-entropy or the curriculum.
    Train(TrainArgs),
    /// Run a grid of training configurations.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long, default_value_t = 600)]
    pub n: usize,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.05)]
    pub p_in: f64,
    #[arg(long, default_value_t = 0.005)]
    pub p_out: f64,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    /// Distance between class feature means.
    #[arg(long, default_value_t = 1.0)]
    pub shift: f64,
    #[arg(long, default_value_t = 0.4)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 0.1)]
    pub val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone)]
pub struct GraphArgs {
    /// Directory with edges.txt, features.txt, labels.txt and splits.txt.
    #[arg(long)]
    pub graph: PathBuf,
    /// Number of classes; inferred from the labels when omitted.
    #[arg(long)]
    pub classes: Option<usize>,
    /// Label file replacing the graph's own labels as training targets.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct NoiseArgs {
    #[arg(long, default_value = "symmetric", value_parser = parse_from_str::<NoiseKind>)]
    pub noise_kind: NoiseKind,
    #[arg(long, default_value = "train", value_parser = parse_from_str::<NoiseScope>)]
    pub noise_scope: NoiseScope,
    #[arg(long, default_value_t = tss_core::noise::DEFAULT_INSTANCE_STD)]
    pub instance_std: f64,
}

#[derive(Args, Debug)]
pub struct CorruptArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long)]
    pub noise_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum NodeSet {
    Train,
    All,
}

#[derive(Args, Debug)]
pub struct CbcArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = tss_core::ppr::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = tss_core::centrality::DEFAULT_EPSILON)]
    pub eps: f64,
    /// Maximum number of label-disagreeing pairs; 0 always evaluates every pair.
    #[arg(long, default_value_t = tss_core::centrality::DEFAULT_PAIR_BUDGET)]
    pub pair_budget: usize,
    #[arg(long, value_enum, default_value_t = NodeSet::Train)]
    pub node_set: NodeSet,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exit with status 1 unless near-boundary nodes score higher on average.
    #[arg(long)]
    pub check_separation: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Plain,
    Tss,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Plain => "plain",
            Method::Tss => "tss",
        }
    }
}

/// Training knobs shared by `train` and `sweep`.
#[derive(Args, Debug, Clone)]
pub struct TrainKnobs {
    /// Curriculum length, also the epoch budget of plain training.
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    #[arg(long, default_value_t = tss_core::tss::DEFAULT_PRETRAIN_EPOCHS)]
    pub pretrain_epochs: usize,
    #[arg(long, default_value_t = tss_core::tss::DEFAULT_PATIENCE)]
    pub patience: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, default_value_t = tss_core::tss::DEFAULT_NOISY_VAL_FRACTION)]
    pub noisy_val: f64,
    /// Re-extract confident nodes with the current model every k epochs.
    #[arg(long)]
    pub refresh: Option<usize>,
    #[arg(long, default_value_t = tss_core::centrality::DEFAULT_EPSILON)]
    pub eps: f64,
    /// Maximum number of label-disagreeing pairs; 0 always evaluates every pair.
    #[arg(long, default_value_t = tss_core::centrality::DEFAULT_PAIR_BUDGET)]
    pub pair_budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of independent runs, each with its own derived seed.
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, default_value_t = Method::Tss)]
    pub method: Method,
    #[arg(long, default_value_t = tss_core::ppr::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, default_value_t = tss_core::tss::DEFAULT_LAMBDA0)]
    pub lambda0: f64,
    #[arg(long, default_value = "linear", value_parser = parse_from_str::<PacingKind>)]
    pub pacing: PacingKind,
    #[command(flatten)]
    pub noise: NoiseArgs,
    /// Corrupt the training labels afresh for every run at this rate.
    #[arg(long)]
    pub noise_rate: Option<f64>,
    #[command(flatten)]
    pub knobs: TrainKnobs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "tss")]
    pub methods: Vec<Method>,
    #[arg(long, value_delimiter = ',', default_value = "0.15")]
    pub alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    pub lambda0: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "linear", value_parser = parse_from_str::<PacingKind>)]
    pub pacing: Vec<PacingKind>,
    #[command(flatten)]
    pub noise: NoiseArgs,
    #[arg(long, value_delimiter = ',')]
    pub noise_rate: Vec<f64>,
    #[command(flatten)]
    pub knobs: TrainKnobs,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_from_str<T: std::str::FromStr<Err = tss_core::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: tss_core::Error| e.to_string())
}
