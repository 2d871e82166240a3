use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CciError {
    #[error("no runs to aggregate")]
    EmptyRunList,
    #[error("culture mismatch (missing: {missing:?}, extra: {extra:?})")]
    CultureMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("score {value} for {culture} is outside [0, 1]")]
    OutOfRangeScore { culture: String, value: f64 },
    #[error("culture set has {0} member(s); at least 2 are required")]
    DegenerateCultureSet(usize),
    #[error("target culture {0:?} is not in the culture set")]
    TargetNotInSet(String),
    #[error("culture {0:?} appears more than once")]
    DuplicateCulture(String),
    #[error("culture set has {0} member(s); at least 2 are required")]
    TooFewCultures(usize),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("sentence is empty")]
    EmptySentence,
    #[error("failed to read template {path}: {message}")]
    TemplateIo { path: PathBuf, message: String },
}

/// Failure to turn model output into typed scores.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("no JSON value found in response")]
    NoJsonFound,
    #[error("response JSON does not match the expected schema: {0}")]
    SchemaMismatch(String),
    #[error("response is missing culture {0:?}")]
    MissingCulture(String),
    #[error("score {value} for {field} is outside [0, 1] beyond the clamp tolerance")]
    OutOfRangeScore { field: String, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("network error after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("request timed out after {attempts} attempt(s)")]
    Timeout { attempts: u32 },
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("backend refused the request: {0}")]
    Refusal(String),
    #[error("no fixture entry for prompt {prompt_sha256} run {run_index}")]
    FixtureMissing {
        prompt_sha256: String,
        run_index: u32,
    },
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache record {key} is corrupted")]
    StoreCorrupted { key: String },
    #[error("cache key {key} already holds a different response")]
    ConflictingRecord { key: String },
    #[error("cache store is not writable: {0}")]
    StoreUnwritable(String),
    #[error("cache directory {0} is locked by another writer")]
    Locked(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("class {0} has no items")]
    EmptyClass(&'static str),
    #[error("item {item_id} has no prediction for model {model}")]
    MissingPrediction { item_id: String, model: String },
    #[error("bin width must be positive, got {0}")]
    InvalidWidth(f64),
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: malformed record: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("invalid dataset configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Errors from the end-to-end scoring pipeline.
#[derive(Debug, Error)]
pub enum ScoreError {
    #[error(transparent)]
    Cci(#[from] CciError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("run {run_index}: {source} (after {attempts} attempt(s))")]
    Parse {
        run_index: u32,
        attempts: u32,
        source: ParseError,
    },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("n_runs must be at least 1")]
    NoRuns,
}
