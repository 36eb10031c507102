use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sidprune::config::Preset;
use sidprune::eval::Method;
use sidprune::io::ReportFormat;
use sidprune::pruning::Marginalization;

/// Pose-graph pruning experiments.
///
/// Any flag can also be set from a `key = value` file passed with
/// `--config FILE`; flags on the command line win over the file, and the file
/// wins over the preset.
#[derive(Debug, Parser)]
#[command(name = "sidprune", version, args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic graph and its ground truth (`<out>.gt`).
    #[command(subcommand)]
    Generate(Generate),
    /// Vertex pruning followed by edge pruning.
    Prune(PruneArgs),
    /// Least-squares optimization of a graph file.
    Optimize(OptimizeArgs),
    /// Compare a graph against a reference graph or ground-truth file.
    Eval(EvalArgs),
    /// Repeated prune-and-optimize runs on corrupted grids.
    Montecarlo(MonteCarloArgs),
}

#[derive(Debug, Subcommand)]
pub enum Generate {
    /// Lawnmower traversal of a regular grid.
    Grid(GridArgs),
    /// Smooth random walk.
    Random(RandomArgs),
}

#[derive(Debug, Clone, Args)]
pub struct NoiseArgs {
    /// Measurement noise as a multiple of the default levels; 0 keeps measurements exact.
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Fraction of loop closures to replace with wrong measurements.
    #[arg(long, default_value_t = 0.0)]
    pub corrupt: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output graph; stdout when omitted (no ground-truth file is written then).
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long)]
    pub spacing: f64,
    /// Loop closures join vertices closer than this many spacings.
    #[arg(long = "radius-factor", default_value_t = 1.5)]
    pub radius_factor: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

#[derive(Debug, Clone, Args)]
pub struct RandomArgs {
    #[arg(long)]
    pub steps: usize,
    /// Square arena side length in meters.
    #[arg(long, default_value_t = 20.0)]
    pub size: f64,
    #[arg(long = "step-length", default_value_t = 0.5)]
    pub step_length: f64,
    #[arg(long = "loop-radius", default_value_t = 0.75)]
    pub loop_radius: f64,
    #[command(flatten)]
    pub noise: NoiseArgs,
}

/// Pruning thresholds. Unset values come from the preset.
#[derive(Debug, Clone, Args)]
pub struct ThresholdArgs {
    #[arg(long, value_parser = clap::value_parser!(Preset))]
    pub preset: Option<Preset>,
    /// Density threshold.
    #[arg(long = "s-hat")]
    pub s_hat: Option<f64>,
    /// Neighbors summed per density.
    #[arg(long = "N-hat")]
    pub big_n_hat: Option<usize>,
    /// Stop once this few vertices are prunable.
    #[arg(long = "n-hat")]
    pub n_hat: Option<usize>,
    /// Newest vertices that are never pruned.
    #[arg(long = "m-hat")]
    pub m_hat: Option<usize>,
    /// Target edges per vertex.
    #[arg(long = "e-hat")]
    pub e_hat: Option<usize>,
    /// Largest detour ratio for removing an edge.
    #[arg(long = "d-hat")]
    pub d_hat: Option<f64>,
    /// Chi-square gate for contradicting constraints.
    #[arg(long)]
    pub gate: Option<f64>,
}

impl ThresholdArgs {
    pub fn any_explicit(&self) -> bool {
        self.s_hat.is_some()
            || self.big_n_hat.is_some()
            || self.n_hat.is_some()
            || self.m_hat.is_some()
            || self.e_hat.is_some()
            || self.d_hat.is_some()
            || self.gate.is_some()
    }
}

#[derive(Debug, Clone, Args)]
pub struct PruneArgs {
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long, default_value = "sid", value_parser = clap::value_parser!(Marginalization))]
    pub method: Marginalization,
    /// Prune log; defaults to `<out>.log`.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Enables the Huber kernel with this threshold on the whitened residual norm.
    #[arg(long)]
    pub huber: Option<f64>,
    #[arg(long = "max-iterations", default_value_t = 100)]
    pub max_iterations: usize,
    /// Chi-square after every accepted step; defaults to stdout.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    pub estimate: PathBuf,
    /// Reference graph or ground truth; defaults to `<estimate>.gt`.
    pub reference: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct MonteCarloArgs {
    #[arg(long, default_value_t = 50)]
    pub runs: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,0.05,0.1,0.15,0.2")]
    pub fractions: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "none,sid,chow_liu", value_parser = clap::value_parser!(Method))]
    pub methods: Vec<Method>,
    /// Measurement noise as a multiple of the default levels.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 30)]
    pub rows: usize,
    #[arg(long, default_value_t = 30)]
    pub cols: usize,
    #[arg(long, default_value_t = 0.3)]
    pub spacing: f64,
    #[command(flatten)]
    pub thresholds: ThresholdArgs,
    #[arg(long)]
    pub huber: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, default_value = "csv", value_parser = clap::value_parser!(ReportFormat))]
    pub format: ReportFormat,
    /// Per-run reports; the summary table always goes to stdout.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "montecarlo")]
    pub name: String,
}
