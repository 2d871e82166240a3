use std::path::PathBuf;

use cci_core::gateway::{BackendKind, GenerationKind};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "cci", version, about = "Score, evaluate and stratify sentences by cultural specificity")]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,

    /// Log progress to stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each one overrides the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Experiment config file (TOML).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, global = true, value_name = "NAME")]
    pub target: Option<String>,
    /// Comparison cultures for custom mode, comma separated.
    #[arg(long, global = true, value_name = "NAME,...", value_delimiter = ',')]
    pub cultures: Option<Vec<String>>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<Method>,
    /// Add the neighboring-culture rule to the baseline prompt.
    #[arg(long, global = true)]
    pub neighbor_instruction: bool,
    /// Elicitations averaged per sentence.
    #[arg(long, global = true, value_name = "N")]
    pub runs: Option<u32>,
    #[arg(long, global = true, value_enum)]
    pub backend: Option<BackendArg>,
    #[arg(long, global = true, value_name = "ID")]
    pub model: Option<String>,
    #[arg(long, global = true, value_name = "URL")]
    pub endpoint: Option<String>,
    /// Scripted-backend fixture (JSON lines).
    #[arg(long, global = true, value_name = "PATH")]
    pub fixture: Option<PathBuf>,
    /// Environment variable holding the API key.
    #[arg(long, global = true, value_name = "VAR")]
    pub api_key_env: Option<String>,
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Experiment directory; holds the response cache.
    #[arg(long, global = true, value_name = "DIR")]
    pub exp_dir: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long, global = true, value_name = "DIR")]
    pub templates_dir: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score sentences with CCI or the direct baseline.
    Score(ScoreArgs),
    /// Separability of scores against class labels (AUC, medians, ROC).
    Evaluate(EvaluateArgs),
    /// Per-bin task accuracy over CCI ranges.
    Stratify(StratifyArgs),
    /// Generate an evaluation corpus with the backend.
    Generate(GenerateArgs),
    /// Response cache maintenance.
    Cache {
        #[command(subcommand)]
        command: CacheCommand,
    },
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Sentences or benchmark items to score.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub input_format: Option<InputFormat>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Output of `cci score`.
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Labeled sentences (`{id, text, label}` lines).
    #[arg(long, value_name = "PATH")]
    pub labels: PathBuf,
    /// Score field to evaluate; defaults to whichever the scores file carries.
    #[arg(long, value_enum)]
    pub field: Option<ScoreField>,
    /// Also write ROC points as CSV.
    #[arg(long, value_name = "PATH")]
    pub roc_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StratifyArgs {
    #[arg(long, value_name = "PATH")]
    pub scores: PathBuf,
    /// Per-item correctness: `{id, correct: {model: bool}}` lines.
    #[arg(long, value_name = "PATH")]
    pub predictions: PathBuf,
    #[arg(long, default_value_t = cci_core::metrics::DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    /// Upper edge of the catch-all lowest bin.
    #[arg(long, default_value_t = cci_core::metrics::DEFAULT_LOWER_CATCHALL)]
    pub lower_catchall: f64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: GenerateKind,
}

#[derive(Debug, Subcommand)]
pub enum CacheCommand {
    /// Print record and corruption counts without modifying the store.
    Inspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Global,
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Cci,
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    HttpChat,
    Scripted,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::HttpChat => BackendKind::HttpChat,
            BackendArg::Scripted => BackendKind::Scripted,
        }
    }
}

/// `labeled` is `{id, text, label}` lines; `jcqa` and `jcm` are benchmark items
/// turned into scoring inputs together with their gold answer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    #[default]
    Labeled,
    Jcqa,
    Jcm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum ScoreField {
    Cci,
    CciLog,
    BaselineScore,
}

impl ScoreField {
    pub fn key(self) -> &'static str {
        match self {
            Self::Cci => "cci",
            Self::CciLog => "cci_log",
            Self::BaselineScore => "baseline_score",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GenerateKind {
    General,
    Cultural,
}

impl From<GenerateKind> for GenerationKind {
    fn from(k: GenerateKind) -> Self {
        match k {
            GenerateKind::General => GenerationKind::General,
            GenerateKind::Cultural => GenerationKind::Cultural,
        }
    }
}
