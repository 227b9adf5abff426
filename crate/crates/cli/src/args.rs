use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use neurasp::learn::DEFAULT_EPSILON;
use neurasp::stable::DEFAULT_MODEL_LIMIT;

#[derive(Debug, Parser)]
#[command(name = "neurasp", version, about = "Answer set programs with neural atoms")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// List stable models with their probabilities.
    Solve(SolveArgs),
    /// Query probability, MAP model or marginals.
    Infer(InferArgs),
    /// Train the networks of a program from observations.
    Learn(LearnArgs),
    /// Accuracy of trained networks on a labelled dataset.
    Eval(EvalArgs),
    /// Write a synthetic experiment to a directory.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// Where network outputs come from; at most one of `--outputs`, `--uniform`
/// and `--checkpoint-in` applies.
#[derive(Clone, Debug, Default, Args)]
pub struct ProgramArgs {
    #[arg(long)]
    pub program: PathBuf,
    /// Extra program text appended before grounding (instance facts).
    #[arg(long)]
    pub facts: Option<PathBuf>,
    /// JSON map from pointer term to input vector.
    #[arg(long)]
    pub tensors: Option<PathBuf>,
    /// Model checkpoint; repeat for several models.
    #[arg(long = "checkpoint-in")]
    pub checkpoints: Vec<PathBuf>,
    /// Given output matrices: {"model": {"pointer": [[row], ...]}}.
    #[arg(long)]
    pub outputs: Option<PathBuf>,
    /// Uniform rows for every network.
    #[arg(long)]
    pub uniform: bool,
    #[arg(long = "limit-models", default_value_t = DEFAULT_MODEL_LIMIT)]
    pub limit_models: usize,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Clone, Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub source: ProgramArgs,
    /// Print the ground program first.
    #[arg(long)]
    pub dump_ground: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Query,
    Map,
    Marginal,
}

#[derive(Clone, Debug, Args)]
pub struct InferArgs {
    #[command(flatten)]
    pub source: ProgramArgs,
    #[arg(long, value_enum)]
    pub mode: Mode,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long)]
    pub evidence: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Sgd,
    Adam,
}

#[derive(Clone, Debug, Args)]
pub struct LearnArgs {
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub tensors: Option<PathBuf>,
    /// Start from these checkpoints instead of fresh models.
    #[arg(long = "checkpoint-in")]
    pub checkpoints: Vec<PathBuf>,
    /// Directory receiving `<model>.json` checkpoints and `metrics.jsonl`.
    #[arg(long = "checkpoint-out")]
    pub checkpoint_out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
    /// Threads per batch; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    #[arg(long, value_enum, default_value_t = AlgorithmArg::Adam)]
    pub algorithm: AlgorithmArg,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,
    /// Architecture of a fresh model: `NAME=linear` or
    /// `NAME=mlp:H1,H2,...[:relu|:tanh]`. Unlisted models are linear.
    #[arg(long = "arch")]
    pub arch: Vec<String>,
    /// Labelled dataset evaluated after every epoch.
    #[arg(long = "eval-dataset")]
    pub eval_dataset: Option<PathBuf>,
    /// `NAME=PROGRAM`: also report the fraction of evaluation examples whose
    /// predicted choices admit a stable model of PROGRAM.
    #[arg(long = "check")]
    pub checks: Vec<String>,
    #[arg(long = "limit-models", default_value_t = DEFAULT_MODEL_LIMIT)]
    pub limit_models: usize,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Clone, Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub program: PathBuf,
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub tensors: Option<PathBuf>,
    #[arg(long = "checkpoint-in", required = true)]
    pub checkpoints: Vec<PathBuf>,
    #[arg(long = "check")]
    pub checks: Vec<String>,
    #[arg(long = "limit-models", default_value_t = DEFAULT_MODEL_LIMIT)]
    pub limit_models: usize,
    #[arg(long, value_enum, default_value_t)]
    pub format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Domain {
    Digits,
    Sudoku4,
    Gridpath,
}

#[derive(Clone, Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub domain: Domain,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub count: u64,
    /// Feature noise (digits: default 0.5; gridpath: default 0).
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Held-out digit pairs.
    #[arg(long = "test-count", default_value_t = 500)]
    pub test_count: usize,
    /// Least probability of a given Sudoku digit.
    #[arg(long, default_value_t = 0.6)]
    pub mass: f64,
    /// Most edges removed from a grid instance.
    #[arg(long = "max-removed", default_value_t = 6)]
    pub max_removed: usize,
}
