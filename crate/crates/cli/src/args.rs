//! Command-line surface. Every flag is long-form only.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sinusbench", version, about = "Sinus surgery outcome prediction benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic cohort CSV.
    Synth(SynthArgs),
    /// Parse a cohort, split it and fit the feature encoder.
    Preprocess(PreprocessArgs),
    /// Train a classifier on the training split.
    Train(TrainArgs),
    /// Score the test split with a trained model or the heuristic rule.
    Predict(PredictArgs),
    /// Query a language model (live or from a replay store) for each case.
    Genai(GenaiArgs),
    /// Index a passage corpus and optionally run a query against it.
    RagBuild(RagBuildArgs),
    /// Evaluate a prediction set.
    Evaluate(EvaluateArgs),
    /// Paired comparison of two prediction sets over the same cases.
    Compare(CompareArgs),
    /// Permutation importance of a trained model on the test split.
    Importance(ImportanceArgs),
    /// Collect every report in a run directory into a summary.
    Report(ReportArgs),
    /// Run the whole pipeline from a configuration file.
    Run(RunArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub force: bool,
    /// JSON generator configuration; defaults apply when omitted.
    #[arg(long)]
    pub generator_config: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
}

/// Flags shared by commands that read a cohort into a run directory.
#[derive(Debug, Args, Clone)]
pub struct CohortArgs {
    #[arg(long)]
    pub cohort: PathBuf,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub run_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct PreprocessArgs {
    #[command(flatten)]
    pub io: CohortArgs,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Mlp,
    Logreg,
    Gnb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Weighted,
    Focal,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub io: CohortArgs,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "weighted")]
    pub loss: LossArg,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 400)]
    pub hidden_units: usize,
    #[arg(long, default_value_t = 200)]
    pub epochs: usize,
    /// Name under which the model is stored; defaults to the model kind.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub io: CohortArgs,
    /// Stored model name under the run directory, or `heuristic`.
    #[arg(long)]
    pub model: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenaiMode {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseSelection {
    /// Test split from the run directory.
    Test,
    /// Every labelled case in the cohort.
    All,
}

#[derive(Debug, Args)]
pub struct GenaiArgs {
    #[command(flatten)]
    pub io: CohortArgs,
    #[arg(long, value_enum)]
    pub mode: GenaiMode,
    /// Registered short name such as `claude`.
    #[arg(long)]
    pub model_name: String,
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long, value_enum, default_value = "test")]
    pub cases: CaseSelection,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub rag_k: usize,
    /// Program that turns a JSON request on stdin into a reply on stdout.
    #[arg(long)]
    pub command: Option<String>,
    #[arg(long)]
    pub command_arg: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    pub temperature: f64,
    #[arg(long, default_value_t = 0.9)]
    pub top_p: f64,
    #[arg(long, default_value_t = 1024)]
    pub max_tokens: u32,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Timestamp written into transcripts instead of the wall clock.
    #[arg(long)]
    pub fixed_timestamp: Option<String>,
}

#[derive(Debug, Args)]
pub struct RagBuildArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub run_dir: PathBuf,
    #[arg(long)]
    pub query: Option<String>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
}

#[derive(Debug, Args, Clone)]
pub struct EvalFlags {
    /// Comma-separated net-benefit thresholds.
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10)]
    pub bins: usize,
    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long)]
    pub run_dir: PathBuf,
    #[command(flatten)]
    pub eval: EvalFlags,
    /// Note copied into the report; repeatable.
    #[arg(long)]
    pub flag: Vec<String>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub run_dir: PathBuf,
    #[command(flatten)]
    pub eval: EvalFlags,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[command(flatten)]
    pub io: CohortArgs,
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value_t = 20)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub run_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON run configuration. Flags given here override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub cohort: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub run_id: Option<String>,
    /// Comma-separated model list, e.g. `mlp,heuristic,replay:claude`.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    /// `name=path` replay store for a `replay:name` model; repeatable.
    #[arg(long)]
    pub replay_store: Vec<String>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub bootstrap: Option<usize>,
    #[arg(long)]
    pub fixed_timestamp: Option<String>,
    /// Reuse an existing run directory, replacing its artifacts.
    #[arg(long)]
    pub force: bool,
}
