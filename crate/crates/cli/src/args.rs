use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmfact_core::benchmarks::FoilSetting;
use mmfact_core::combiner::CombinerMethod;
use mmfact_core::judgments::ScoreField;
use mmfact_core::DEFAULT_ALPHA;

/// Multimodal summary factuality evaluation over precomputed embeddings.
///
/// Exit status: 0 on success, 1 on usage or configuration errors, 2 on data
/// errors. MMFACT_THREADS caps the number of worker threads.
#[derive(Debug, Parser)]
#[command(name = "mmfact", version, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every example of a manifest with CLIP-S, BERT-S and CLIPBERTScore.
    Score(ScoreArgs),
    /// Fit a score combiner against aggregated human judgments.
    Tune(TuneArgs),
    /// Correlate a score column with human judgments.
    MetaEval(MetaEvalArgs),
    /// Run a benchmark protocol over prepared instances.
    Benchmark(BenchmarkArgs),
    /// Build step-level train/validation/test examples from articles.
    Ingest(IngestArgs),
    /// Compute self-critical reward advantages for sampled/greedy pairs.
    Reward(RewardArgs),
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// JSON-lines manifest, one example per line.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory holding the containers the manifest refers to.
    #[arg(long)]
    pub containers: PathBuf,
    /// Weight on CLIP-S.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Rescale BERT-S with this baseline before combining.
    #[arg(long)]
    pub rescale_baseline: Option<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Alpha,
    Logistic,
    Mlp,
}

impl From<MethodArg> for CombinerMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Alpha => CombinerMethod::Alpha,
            MethodArg::Logistic => CombinerMethod::Logistic,
            MethodArg::Mlp => CombinerMethod::Mlp,
        }
    }
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    /// Score reports from `mmfact score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Judgments CSV.
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Alpha)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.05)]
    pub grid_step: f64,
    #[arg(long, default_value_t = 8)]
    pub hidden_size: usize,
    #[arg(long, default_value_t = 20_000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fit against the mean of the two facet verdicts instead of their AND.
    #[arg(long)]
    pub continuous: bool,
    /// BERT-S baseline for the logistic and MLP combiners. Defaults to the
    /// baseline recorded in the score reports.
    #[arg(long)]
    pub bert_baseline: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FacetArg {
    Document,
    Image,
    Combined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    ClipS,
    BertS,
    Combined,
}

impl From<MetricArg> for ScoreField {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::ClipS => ScoreField::ClipS,
            MetricArg::BertS => ScoreField::BertS,
            MetricArg::Combined => ScoreField::Combined,
        }
    }
}

#[derive(Debug, Args)]
pub struct MetaEvalArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub judgments: PathBuf,
    #[arg(long, value_enum, default_value_t = FacetArg::Combined)]
    pub facet: FacetArg,
    /// Use the mean of the two facet verdicts for the combined facet.
    #[arg(long)]
    pub continuous: bool,
    /// Score column to correlate.
    #[arg(long, value_enum, default_value_t = MetricArg::Combined)]
    pub metric: MetricArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaskArg {
    Wikihowfact,
    Foil,
    Bison,
    Frank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SettingArg {
    #[value(name = "no-ref")]
    NoRef,
    #[value(name = "1-ref")]
    OneRef,
    #[value(name = "4-ref")]
    FourRef,
}

impl From<SettingArg> for FoilSetting {
    fn from(s: SettingArg) -> Self {
        match s {
            SettingArg::NoRef => FoilSetting::NoRef,
            SettingArg::OneRef => FoilSetting::OneRef,
            SettingArg::FourRef => FoilSetting::FourRef,
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum)]
    pub task: TaskArg,
    /// Instance file (wikihowfact, foil, bison).
    #[arg(long, required_unless_present = "annotations")]
    pub manifest: Option<PathBuf>,
    /// Split label recorded in the wikihowfact report.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Which reference setting produced the FOIL scores.
    #[arg(long, value_enum, default_value_t = SettingArg::NoRef)]
    pub setting: SettingArg,
    /// FRANK human annotations (JSON array or JSON lines).
    #[arg(long, requires = "metric_scores")]
    pub annotations: Option<PathBuf>,
    /// FRANK metric scores keyed by hash and model_name.
    #[arg(long, requires = "annotations")]
    pub metric_scores: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Articles as JSON lines.
    #[arg(long)]
    pub articles: PathBuf,
    /// Directory for train/validation/test/skipped JSON-lines files.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Exact number of validation articles.
    #[arg(long, conflicts_with_all = ["validation_fraction", "test_fraction"])]
    pub validation_articles: Option<usize>,
    /// Exact number of test articles.
    #[arg(long, conflicts_with_all = ["validation_fraction", "test_fraction"])]
    pub test_articles: Option<usize>,
    /// Probability of an article landing in validation; stable as the corpus grows.
    #[arg(long)]
    pub validation_fraction: Option<f64>,
    /// Probability of an article landing in test.
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct RewardArgs {
    /// Sampled/greedy pairs as JSON lines.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Reward configuration JSON; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
