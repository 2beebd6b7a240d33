use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fred::explainer::{DEFAULT_COUNTERFACTUALS, DEFAULT_EPSILON, DEFAULT_POOL_SIZE};
use fred::sampling::Scheme;
use fred::text::DEFAULT_MASK_TOKEN;

#[derive(Debug, Parser)]
#[command(
    name = "fred",
    version,
    about = "Explain black-box text predictions with minimal influential token subsets"
)]
pub struct Cli {
    /// Log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Explain the prediction of a model on one document.
    Explain(ExplainArgs),
    /// Compute faithfulness and robustness metrics over a corpus.
    Eval(EvalArgs),
    /// Print the number of samples needed for a given l_max.
    SampleSize(SampleSizeArgs),
    /// Run the oracle checks of the explainer.
    Verify(VerifyArgs),
    /// Check that a model server speaks the prediction protocol.
    ServeCheck(ServeCheckArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SamplingArg {
    Mask,
    Pos,
}

impl From<SamplingArg> for Scheme {
    fn from(s: SamplingArg) -> Scheme {
        match s {
            SamplingArg::Mask => Scheme::Mask,
            SamplingArg::Pos => Scheme::Pos,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Built-in model file (JSON, kind "linear" or "shortcut").
    #[arg(long, conflicts_with = "endpoint", required_unless_present = "endpoint")]
    pub model: Option<PathBuf>,

    /// TF-IDF vectorizer file supplying idf values for a linear model.
    #[arg(long, requires = "model")]
    pub vectorizer: Option<PathBuf>,

    /// Base URL of a model server; an auth header may be given in FRED_AUTH_HEADER.
    #[arg(long)]
    pub endpoint: Option<String>,

    /// Texts per request to the model server (default: whole batch).
    #[arg(long, requires = "endpoint")]
    pub batch_size: Option<usize>,

    /// Requests in flight to the model server.
    #[arg(long, default_value_t = 4, requires = "endpoint")]
    pub concurrency: usize,

    /// Explained class: "argmax" (class predicted on the example) or an index.
    #[arg(long, default_value = "argmax")]
    pub target: String,
}

#[derive(Debug, Clone, Args)]
pub struct SamplingArgs {
    /// Perturbation scheme.
    #[arg(long, value_enum, default_value_t = SamplingArg::Mask)]
    pub sampling: SamplingArg,

    /// Probability that a token is perturbed (clamped to [0.01, 0.99]).
    #[arg(long = "p", default_value_t = 0.5)]
    pub p: f64,

    /// Probability that each candidate of size l_max is absent from some sample.
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,

    /// Largest candidate size.
    #[arg(long, default_value_t = 10)]
    pub l_max: usize,

    /// Number of samples, overriding the computed size.
    #[arg(long)]
    pub n: Option<usize>,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long, default_value = DEFAULT_MASK_TOKEN)]
    pub mask_token: String,

    /// POS lexicon (token, tag, sentiment; tab separated), needed by --sampling pos.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SearchArgs {
    /// Required drop relative to the mean prediction.
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: f64,

    /// Top-scoring positions used for candidates of size >= 2.
    #[arg(long, default_value_t = DEFAULT_POOL_SIZE)]
    pub pool_size: usize,

    /// Number of counterfactuals reported.
    #[arg(long, default_value_t = DEFAULT_COUNTERFACTUALS)]
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Ansi,
    Html,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    /// Text to explain.
    #[arg(conflicts_with = "input", required_unless_present = "input")]
    pub text: Option<String>,

    /// Read the text to explain from a file.
    #[arg(long)]
    pub input: Option<PathBuf>,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub sampling: SamplingArgs,

    #[command(flatten)]
    pub search: SearchArgs,

    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,

    /// Also write the explanation JSON to this file.
    #[arg(long)]
    pub json_out: Option<PathBuf>,

    /// Write the rendered output to this file instead of stdout.
    #[arg(long, short = 'o')]
    pub out: Option<PathBuf>,

    /// Record wall time in the JSON (makes output differ between runs).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    None,
    Asc,
    Desc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SeedPolicyArg {
    Fresh,
    Reuse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Table,
    Json,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Corpus: JSON lines with "text" and optional "label", or one document per line.
    #[arg(long)]
    pub corpus: PathBuf,

    #[command(flatten)]
    pub model: ModelArgs,

    #[command(flatten)]
    pub sampling: SamplingArgs,

    #[command(flatten)]
    pub search: SearchArgs,

    /// Comma-separated metrics (sufficiency, comprehensiveness, robustness, aucmorf, time, proportion).
    #[arg(
        long,
        default_value = "sufficiency,comprehensiveness,robustness,aucmorf,time,proportion"
    )]
    pub metrics: String,

    /// Comma-separated methods (fred, fredpos, random).
    #[arg(long, default_value = "fred,random")]
    pub methods: String,

    /// Number of documents evaluated.
    #[arg(long)]
    pub count: Option<usize>,

    /// Keep documents the model assigns to this class index.
    #[arg(long)]
    pub class: Option<usize>,

    /// Keep documents with this corpus label.
    #[arg(long)]
    pub label: Option<String>,

    /// Order documents by length before truncating to --count.
    #[arg(long, value_enum, default_value_t = OrderArg::None)]
    pub order: OrderArg,

    /// Reruns per document for robustness.
    #[arg(long, default_value_t = 10)]
    pub robustness_runs: usize,

    #[arg(long, value_enum, default_value_t = SeedPolicyArg::Fresh)]
    pub seed_policy: SeedPolicyArg,

    #[arg(long, value_enum, default_value_t = ReportFormat::Table)]
    pub format: ReportFormat,

    /// Also write the JSON report to this file.
    #[arg(long)]
    pub json_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SampleSizeArgs {
    #[arg(long, default_value_t = 0.95)]
    pub alpha: f64,

    #[arg(long = "p", default_value_t = 0.5)]
    pub p: f64,

    #[arg(long, default_value_t = 10)]
    pub l_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IdfRuleArg {
    Smooth,
    /// `ln(N / N_j)`, a deliberately wrong rule for mutation checks.
    Unsmoothed,
    /// idf = 1 for every term.
    Constant,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Fewer instances per check.
    #[arg(long)]
    pub quick: bool,

    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,

    /// idf rule of the linear models under test.
    #[arg(long, value_enum, default_value_t = IdfRuleArg::Smooth, hide = true)]
    pub idf_rule: IdfRuleArg,
}

#[derive(Debug, Args)]
pub struct ServeCheckArgs {
    /// Base URL of the model server.
    #[arg(long)]
    pub endpoint: String,

    /// Recorded request/response pair the server must reproduce.
    #[arg(long)]
    pub fixture: PathBuf,

    /// Absolute tolerance on recorded probabilities.
    #[arg(long, default_value_t = 1e-6)]
    pub tolerance: f64,
}
