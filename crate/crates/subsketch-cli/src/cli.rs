//! Argument surface.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "subsketch",
    about = "Subspace sketches and coresets for weighted lp norms, affine losses and SVM point queries",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Build a batch coreset sketch from a point file.
    Build(BuildArgs),
    /// Query a sketch file at a direction.
    Query(QueryArgs),
    /// One-pass streaming sketch construction.
    Stream(StreamArgs),
    /// SVM point-estimation sketches.
    #[command(subcommand)]
    Svm(SvmCommand),
    /// Scaling-law experiment reports.
    Experiment(ExperimentArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum BuildMode {
    Additive,
    Multiplicative,
}

#[derive(Args)]
pub struct BuildArgs {
    /// Input rows: LPSS1 binary or CSV (one row per line).
    #[arg(long)]
    pub input: PathBuf,
    /// Exponent p >= 1, integer or rational like "3/2".
    #[arg(long)]
    pub p: String,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, value_enum, default_value = "multiplicative")]
    pub mode: BuildMode,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Lift rows with a -1 coordinate: queries take --b and answer
    /// sum_i w_i |<A_i, x> - b|^p.
    #[arg(long)]
    pub affine: bool,
    /// CSV inputs carry a trailing weight column.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub sketch: PathBuf,
    /// Comma-separated query coordinates.
    #[arg(long)]
    pub x: String,
    /// Affine offset (affine sketches only).
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum StreamAlgo {
    /// Merge-and-reduce coreset.
    Mr,
    /// Sensitivity-sampled two-tier pipeline.
    Sens,
    /// O(1)-update region sketch.
    Region,
    /// Region sketch with subdivision splitting (d <= 2p + 2).
    RegionTight,
    /// d = 2 trigonometric-moment sketch.
    Fourier,
}

#[derive(Args)]
pub struct StreamArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub algo: StreamAlgo,
    #[arg(long)]
    pub p: String,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Independent replicas for region sketches (median at query time).
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Subcommand)]
pub enum SvmCommand {
    Build(SvmBuildArgs),
    Query(SvmQueryArgs),
}

#[derive(Args)]
pub struct SvmBuildArgs {
    /// Labeled rows: d floats then a +1/-1 label column.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// CSV inputs carry a weight column before the label.
    #[arg(long)]
    pub weighted: bool,
}

#[derive(Args)]
pub struct SvmQueryArgs {
    #[arg(long)]
    pub sketch: PathBuf,
    /// Comma-separated model vector theta.
    #[arg(long)]
    pub theta: String,
    #[arg(long, default_value_t = 0.0)]
    pub b: f64,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    /// Additive coreset size against 1/eps.
    CoresetScaling,
    /// Separation delta(N) of the interleaved-lattice pair.
    DeltaScaling,
    /// Funk-Hecke eigenvalue table and decay exponent.
    Lambda,
    /// SVM sketch size against 1/eps.
    SvmScaling,
}

#[derive(Args)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    pub kind: ExperimentKind,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub p: Option<u32>,
    /// Input size per grid point, where applicable.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Seeds averaged per grid point.
    #[arg(long, default_value_t = 4)]
    pub repeats: usize,
}
