use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// EXPoSE anomaly detection: kernel mean embeddings estimated in constant time.
#[derive(Debug, Parser)]
#[command(name = "expose", version, arg_required_else_help = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a random Fourier feature map and write the embedded rows as CSV.
    Features(FeaturesArgs),
    /// Fit a model, either by stochastic optimization or the full empirical mean.
    Train(TrainArgs),
    /// Score rows against a trained model.
    Score(ScoreArgs),
    /// Calibrate a threshold by cross-validation and report the classification error.
    Eval(EvalArgs),
    /// Record convergence diagnostics of the stochastic estimator against the full one.
    Convergence(ConvergenceArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    /// Comma-separated numbers, optional trailing label column.
    Csv,
    /// IDX image file; labels from --labels.
    Idx,
    /// KDD-CUP 99 connection records.
    Kdd,
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// Input data file.
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// IDX label file (required with --format idx).
    #[arg(long, value_name = "PATH")]
    pub labels: Option<PathBuf>,
    /// CSV: the last column is an integer label.
    #[arg(long)]
    pub has_labels: bool,
    /// CSV: skip the first line.
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Gaussian kernel bandwidth σ² in k(x, y) = exp(−‖x − y‖² / (2σ²)).
    #[arg(long, value_name = "SIGMA2")]
    pub bandwidth: f64,
    /// Number of random frequencies r; features have 2r entries.
    #[arg(long, value_name = "R", default_value_t = 2048)]
    pub expansions: usize,
    /// Seed for every random choice (feature map and sampling).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EpsilonMode {
    /// ε bounds the expected objective gap: T = ⌈M²/(2ε)⌉.
    Objective,
    /// ε bounds the expected parameter distance: T = ⌈M²/ε²⌉.
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Sampling {
    WithReplacement,
    WithoutReplacement,
}

#[derive(Debug, Clone, Args)]
pub struct SgdArgs {
    /// Step-size scale θ in γ_t = θ/t; must exceed 1/2.
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// Radius M of the feasible ball (the kernel bound).
    #[arg(long, value_name = "M", default_value_t = 1.0)]
    pub radius: f64,
    /// Number of stochastic steps T.
    #[arg(long, value_name = "T", conflicts_with = "epsilon")]
    pub iterations: Option<u64>,
    /// Target accuracy ε; T is derived from it.
    #[arg(long, value_name = "EPS")]
    pub epsilon: Option<f64>,
    #[arg(long, value_enum, default_value_t = EpsilonMode::Objective)]
    pub epsilon_mode: EpsilonMode,
    /// Row sampling [default: with-replacement for train, without-replacement for convergence].
    #[arg(long, value_enum)]
    pub sampling: Option<Sampling>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Projected stochastic approximation (constant cost in n).
    Sgd,
    /// Exact empirical mean over all rows.
    Full,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    /// Output CSV of embedded rows.
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[arg(long, value_enum, default_value_t = Method::Sgd)]
    pub method: Method,
    /// Keep only rows with this label for training.
    #[arg(long)]
    pub normal_label: Option<i64>,
    /// Model file to write; KDD input also writes `<PATH>.kdd.json`.
    #[arg(long, short, value_name = "PATH", default_value = "model.expose")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Model file written by `train`.
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Add a prediction column: normal iff score ≥ τ.
    #[arg(long, value_name = "TAU")]
    pub threshold: Option<f64>,
    /// Output CSV (index, score, label?, prediction?).
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_name = "PATH")]
    pub model: PathBuf,
    /// Label of the normal class; other labels count as anomalies. Without it labels must be 1/0.
    #[arg(long)]
    pub normal_label: Option<i64>,
    /// Optional CSV of scores and predictions.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConvergenceArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
    #[command(flatten)]
    pub sgd: SgdArgs,
    /// Label of the normal class.
    #[arg(long)]
    pub normal_label: i64,
    /// Rows held out for scoring.
    #[arg(long, default_value_t = 10_000)]
    pub test_size: usize,
    /// Record diagnostics every this many steps.
    #[arg(long, default_value_t = 200)]
    pub eval_every: u64,
    /// Independent repetitions to average.
    #[arg(long, default_value_t = 10)]
    pub repetitions: usize,
    /// Add theoretical bound columns M²/t and M²/(2t).
    #[arg(long)]
    pub include_bounds: bool,
    /// Also write one CSV per repetition next to the output.
    #[arg(long)]
    pub per_run: bool,
    /// Aggregated diagnostics CSV; a `.manifest.json` is written beside it.
    #[arg(long, short, value_name = "PATH")]
    pub output: PathBuf,
}

pub fn parse_args<I, T>(argv: I) -> Result<Cli, clap::Error>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    Cli::try_parse_from(argv)
}
