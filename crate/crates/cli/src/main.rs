mod commands;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smhd_core::classify::{ModelKind, Task};
use smhd_core::cohort::{Dataset, Split};
use smhd_core::Condition;

/// Builds and analyses self-reported mental health diagnosis cohorts.
#[derive(Debug, Parser)]
#[command(name = "smhd", version)]
struct Cli {
    /// Worker threads; outputs do not depend on it.
    #[arg(long, global = true, env = "SMHD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a seeded corpus with planted ground truth.
    Synth(SynthArgs),
    /// Select diagnosed users, match controls and assign splits.
    Build(BuildArgs),
    /// Sweep the trigger-keyword distance over annotated posts.
    Tune(TuneArgs),
    /// Dataset statistics and condition co-occurrence.
    Stats(StatsArgs),
    /// Category usage of each condition group against controls.
    Analyze(AnalyzeArgs),
    /// Train a baseline classifier.
    Train(TrainArgs),
    /// Score a model or a predictions file on one split.
    Eval(EvalArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct PatternArgs {
    /// Diagnosis templates, one per line; `!` marks a negative template.
    #[arg(long)]
    pub patterns: Option<PathBuf>,
    /// Condition keyword lexicons (JSON).
    #[arg(long)]
    pub lexicons: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct PolicyArgs {
    /// Mental-health subreddit names, one per line.
    #[arg(long)]
    pub mh_subreddits: Option<PathBuf>,
    /// Mental-health terms, one per line.
    #[arg(long)]
    pub mh_terms: Option<PathBuf>,
    /// Terms whose posts are dropped from every user.
    #[arg(long)]
    pub removal_terms: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetArg {
    Smhd,
    SmhdRc,
    All,
}

impl DatasetArg {
    pub fn datasets(self) -> &'static [Dataset] {
        match self {
            DatasetArg::Smhd => &[Dataset::Smhd],
            DatasetArg::SmhdRc => &[Dataset::SmhdRc],
            DatasetArg::All => &[Dataset::Smhd, Dataset::SmhdRc],
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelArg {
    Logreg,
    Svm,
    Fasttext,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> ModelKind {
        match m {
            ModelArg::Logreg => ModelKind::Logreg,
            ModelArg::Svm => ModelKind::Svm,
            ModelArg::Fasttext => ModelKind::Fasttext,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Binary,
    Multilabel,
}

impl From<TaskArg> for Task {
    fn from(t: TaskArg) -> Task {
        match t {
            TaskArg::Binary => Task::Binary,
            TaskArg::Multilabel => Task::Multilabel,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitArg {
    Train,
    Dev,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Dev => Split::Dev,
            SplitArg::Test => Split::Test,
        }
    }
}

fn parse_condition(s: &str) -> Result<Condition, String> {
    s.parse().map_err(|_| {
        let names: Vec<&str> = Condition::ALL.iter().map(|c| c.as_str()).collect();
        format!("unknown condition {s:?}; expected one of {}", names.join(", "))
    })
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Generator configuration (JSON); defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BuildArgs {
    /// NDJSON post dump, optionally gzip-compressed.
    #[arg(long)]
    pub posts: PathBuf,
    #[command(flatten)]
    pub pattern: PatternArgs,
    #[command(flatten)]
    pub policy: PolicyArgs,
    /// Largest trigger-keyword gap in characters.
    #[arg(long, default_value_t = 40)]
    pub max_dist: usize,
    /// Controls sought per diagnosed user.
    #[arg(long, default_value_t = 9)]
    pub target_controls: usize,
    /// Minimum posts left after mental-health filtering.
    #[arg(long, default_value_t = 50)]
    pub min_posts: usize,
    /// Train, dev and test proportions.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0.8, 0.1, 0.1])]
    pub split_ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    /// Reject posts outside the collection window.
    #[arg(long)]
    pub strict_window: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    /// Annotated posts: one `{"text", "conditions"}` object per line.
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100])]
    pub grid: Vec<usize>,
    /// Verified matches: one `{"label", "correct"}` object per line.
    #[arg(long)]
    pub verified: Option<PathBuf>,
    #[command(flatten)]
    pub pattern: PatternArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CohortInput {
    /// The post dump the cohort was built from.
    #[arg(long)]
    pub posts: PathBuf,
    /// Cohort file written by `build`.
    #[arg(long)]
    pub cohort: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, value_enum, default_value_t = DatasetArg::Smhd)]
    pub dataset: DatasetArg,
    /// Reject posts outside the collection window, as at build time.
    #[arg(long)]
    pub strict_window: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: CohortInput,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub input: CohortInput,
    /// Category lexicon (TSV: category, entry).
    #[arg(long)]
    pub categories: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[command(flatten)]
    pub input: CohortInput,
    #[arg(long, value_enum, default_value_t = ModelArg::Logreg)]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value_t = TaskArg::Binary)]
    pub task: TaskArg,
    /// Conditions to train; every trainable one when omitted.
    #[arg(long, value_delimiter = ',', value_parser = parse_condition)]
    pub conditions: Option<Vec<Condition>>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// L2 penalty of the linear models.
    #[arg(long)]
    pub l2: Option<f64>,
    /// Embedding size of the fastText model.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Minimum training-set frequency for a vocabulary token.
    #[arg(long, default_value_t = 20)]
    pub min_token_count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["model", "predictions"])))]
pub struct EvalArgs {
    /// The post dump; needed with `--model`.
    #[arg(long)]
    pub posts: Option<PathBuf>,
    #[arg(long)]
    pub cohort: PathBuf,
    #[command(flatten)]
    pub policy: PolicyArgs,
    #[arg(long, value_enum, default_value_t = DatasetArg::Smhd)]
    pub dataset: DatasetArg,
    #[arg(long)]
    pub strict_window: bool,
    /// Model file written by `train`.
    #[arg(long, requires = "posts")]
    pub model: Option<PathBuf>,
    /// Existing predictions: one `{"user_id", "scores"}` object per line.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
    /// Score at or above which a label is predicted.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn error_line(e: &smhd_core::Error) -> String {
    serde_json::json!({ "error": e.code(), "message": e.to_string() }).to_string()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let result = pool
        .build()
        .map_err(|e| smhd_core::Error::InvalidArgument(format!("thread pool: {e}")))
        .and_then(|pool| pool.install(|| commands::dispatch(&cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            ExitCode::from(1)
        }
    }
}
