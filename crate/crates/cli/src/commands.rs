//! Subcommand implementations. Each returns an [`Outcome`] or a command-level error;
//! machine output goes to `out` (stdout when absent), summaries to stderr.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use cci_core::datasets::{
    build_jcm_input, build_jcqa_input, load_labeled_sentences, load_mcq_items, load_moral_items,
    write_jsonl, Label,
};
use cci_core::gateway::{build_backend, run_bounded, Scorer};
use cci_core::metrics::{bin_by_cci, separability, stratified_accuracy, ScoredItem};
use cci_core::report::{render_separability, render_stratification, roc_csv};
use cci_core::{CacheError, CultureSet, ScoreCache, ScoreError};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::args::{EvaluateArgs, GenerateArgs, InputFormat, Method, ScoreArgs, ScoreField, StratifyArgs};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Outcome};

/// One line of `cci score` output.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum ScoreLine {
    Cci {
        id: String,
        cci: f64,
        cci_log: Option<f64>,
        breakdown: BTreeMap<String, f64>,
        n_runs: u32,
    },
    Baseline {
        id: String,
        baseline_score: f64,
    },
    Error {
        id: String,
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreSummary {
    pub ok: usize,
    pub failed: usize,
    pub backend_calls: usize,
}

impl ScoreSummary {
    pub fn outcome(&self) -> Outcome {
        Outcome::from_counts(self.ok, self.failed)
    }
}

fn write_output(out: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(CliError::io(dir))?;
            }
            fs::write(path, bytes).map_err(CliError::io(path))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|_| stdout.flush())
                .map_err(CliError::io("<stdout>"))
        }
    }
}

fn to_line<T: Serialize>(value: &T) -> Vec<u8> {
    let mut line = serde_json::to_vec(value).expect("output records serialize");
    line.push(b'\n');
    line
}

/// Scoring inputs as `(id, text)` in file order.
pub fn load_inputs(
    config: &ExperimentConfig,
    path: &Path,
    format: InputFormat,
) -> Result<Vec<(String, String)>, CliError> {
    let dataset = |source| CliError::Dataset {
        path: path.to_path_buf(),
        source,
    };
    Ok(match format {
        InputFormat::Labeled => {
            let loaded = load_labeled_sentences(path).map_err(dataset)?;
            for w in &loaded.warnings {
                tracing::warn!(?w, "input warning");
            }
            loaded.records.into_iter().map(|s| (s.id, s.text)).collect()
        }
        InputFormat::Jcqa => load_mcq_items(path, &config.jcqa_fields)
            .map_err(dataset)?
            .iter()
            .map(|item| (item.id.clone(), build_jcqa_input(item)))
            .collect(),
        InputFormat::Jcm => load_moral_items(path, &config.jcm_fields)
            .map_err(dataset)?
            .iter()
            .map(|item| (item.id.clone(), build_jcm_input(item, &config.jcm_labels)))
            .collect(),
    })
}

fn open_cache(dir: &Path) -> Result<ScoreCache, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    Ok(ScoreCache::open(dir)?)
}

fn build_scorer(config: &ExperimentConfig) -> Result<Scorer, CliError> {
    let backend_config = config.backend_config()?;
    let templates = config.templates()?;
    let backend = build_backend(&backend_config)?;
    let cache = Arc::new(open_cache(&config.exp_dir)?);
    Ok(Scorer::new(backend, cache, templates, (&backend_config).into()))
}

enum Plan {
    Cci(CultureSet),
    Baseline { target: String, neighbor: bool },
}

pub fn score(config: &ExperimentConfig, args: &ScoreArgs, out: Option<&Path>) -> Result<ScoreSummary, CliError> {
    let plan = match config.method {
        Method::Cci => Plan::Cci(config.culture_set()?),
        Method::Baseline => Plan::Baseline {
            target: config.target()?.to_owned(),
            neighbor: config.neighbor_instruction,
        },
    };
    let format = args.input_format.unwrap_or(config.input_format);
    let inputs = load_inputs(config, &args.input, format)?;
    let scorer = build_scorer(config)?;
    let n_runs = config.n_runs;

    let results = run_bounded(&inputs, config.workers, |(id, text)| match &plan {
        Plan::Cci(set) => scorer.score_sentence(text, set, n_runs).map(|r| ScoreLine::Cci {
            id: id.clone(),
            cci: r.cci,
            cci_log: r.cci_log,
            breakdown: r.breakdown.scores().clone(),
            n_runs: r.n_runs,
        }),
        Plan::Baseline { target, neighbor } => scorer
            .score_baseline(text, target, *neighbor, n_runs)
            .map(|r| ScoreLine::Baseline {
                id: id.clone(),
                baseline_score: r.score,
            }),
    });

    let mut lines = Vec::with_capacity(results.len());
    for ((id, _), result) in inputs.iter().zip(results) {
        match result {
            Ok(line) => lines.push(line),
            // A cache that cannot be written is fatal for the whole run.
            Err(ScoreError::Cache(e @ (CacheError::StoreUnwritable(_) | CacheError::Io(_)))) => {
                return Err(e.into())
            }
            Err(e) => {
                tracing::warn!(%id, error = %e, "item failed");
                lines.push(ScoreLine::Error {
                    id: id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }

    let failed = lines.iter().filter(|l| matches!(l, ScoreLine::Error { .. })).count();
    let bytes: Vec<u8> = lines.iter().flat_map(to_line).collect();
    write_output(out, &bytes)?;

    let summary = ScoreSummary {
        ok: lines.len() - failed,
        failed,
        backend_calls: scorer.backend_calls(),
    };
    eprintln!(
        "scored {} items: {} ok, {} failed; backend calls: {}",
        lines.len(),
        summary.ok,
        summary.failed,
        summary.backend_calls
    );
    Ok(summary)
}

/// A successfully scored item read back from a scores file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreEntry {
    pub id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoresFile {
    pub field: &'static str,
    pub entries: Vec<ScoreEntry>,
    /// Ids of error records.
    pub failed: Vec<String>,
}

fn id_of(obj: &Map<String, Value>) -> Option<String> {
    match obj.get("id")? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Reads `cci score` output. Without an explicit field, `cci` is used when
/// present and `baseline_score` otherwise.
pub fn read_scores(path: &Path, field: Option<ScoreField>) -> Result<ScoresFile, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let bad = |line: usize, message: String| CliError::BadRecord {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut field_key = field.map(ScoreField::key);
    let mut entries = Vec::new();
    let mut failed = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let obj: Map<String, Value> = serde_json::from_str(line).map_err(|e| bad(i + 1, e.to_string()))?;
        let id = id_of(&obj).ok_or_else(|| bad(i + 1, "missing id".into()))?;
        if !seen.insert(id.clone()) {
            return Err(bad(i + 1, format!("duplicate id {id:?}")));
        }
        if obj.contains_key("error") {
            failed.push(id);
            continue;
        }
        let key = *field_key.get_or_insert(if obj.contains_key("cci") { "cci" } else { "baseline_score" });
        let score = obj
            .get(key)
            .and_then(Value::as_f64)
            .ok_or_else(|| bad(i + 1, format!("missing numeric {key:?}")))?;
        entries.push(ScoreEntry { id, score });
    }
    if !failed.is_empty() {
        tracing::warn!(count = failed.len(), "skipping error records");
    }
    Ok(ScoresFile {
        field: field_key.unwrap_or("cci"),
        entries,
        failed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub field: &'static str,
    #[serde(flatten)]
    pub separability: cci_core::SeparabilityReport,
    pub n_skipped: usize,
}

pub fn evaluate(args: &EvaluateArgs, out: Option<&Path>) -> Result<EvaluationReport, CliError> {
    let scores = read_scores(&args.scores, args.field)?;
    let labels: HashMap<String, Label> = load_labeled_sentences(&args.labels)
        .map_err(|source| CliError::Dataset {
            path: args.labels.clone(),
            source,
        })?
        .records
        .into_iter()
        .map(|s| (s.id, s.label))
        .collect();

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for entry in &scores.entries {
        match labels.get(&entry.id) {
            Some(Label::CultureSpecific) => positives.push(entry.score),
            Some(Label::General) => negatives.push(entry.score),
            None => return Err(CliError::MissingLabel(entry.id.clone())),
        }
    }
    let report = EvaluationReport {
        field: scores.field,
        separability: separability(&positives, &negatives)?,
        n_skipped: scores.failed.len(),
    };
    write_output(out, &to_line(&report))?;
    if let Some(path) = &args.roc_csv {
        fs::write(path, roc_csv(&report.separability.roc_points)).map_err(CliError::io(path))?;
    }
    eprint!(
        "{}",
        render_separability(&[(report.field.to_owned(), &report.separability)])
    );
    Ok(report)
}

/// Reads `{id, correct: {model: bool}}` lines.
pub fn read_predictions(path: &Path) -> Result<BTreeMap<String, BTreeMap<String, bool>>, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    let bad = |line: usize, message: String| CliError::BadRecord {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut predictions = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let obj: Map<String, Value> = serde_json::from_str(line).map_err(|e| bad(i + 1, e.to_string()))?;
        let id = id_of(&obj).ok_or_else(|| bad(i + 1, "missing id".into()))?;
        let correct: BTreeMap<String, bool> = obj
            .get("correct")
            .cloned()
            .and_then(|v| serde_json::from_value(v).ok())
            .ok_or_else(|| bad(i + 1, "\"correct\" must map model names to booleans".into()))?;
        if predictions.insert(id.clone(), correct).is_some() {
            return Err(bad(i + 1, format!("duplicate id {id:?}")));
        }
    }
    Ok(predictions)
}

pub fn stratify(
    args: &StratifyArgs,
    out: Option<&Path>,
) -> Result<cci_core::StratificationTable, CliError> {
    let scores = read_scores(&args.scores, None)?;
    let predictions = read_predictions(&args.predictions)?;

    let scored: BTreeSet<&str> = scores.entries.iter().map(|e| e.id.as_str()).collect();
    let failed: BTreeSet<&str> = scores.failed.iter().map(String::as_str).collect();
    let orphans: Vec<&String> = predictions
        .keys()
        .filter(|id| !scored.contains(id.as_str()) && !failed.contains(id.as_str()))
        .collect();
    if let Some(first) = orphans.first() {
        return Err(CliError::JoinMismatch {
            count: orphans.len(),
            first: (*first).clone(),
        });
    }
    if let Some(missing) = scores.entries.iter().find(|e| !predictions.contains_key(&e.id)) {
        return Err(CliError::MissingPrediction(missing.id.clone()));
    }

    let items: Vec<ScoredItem> = scores
        .entries
        .iter()
        .map(|e| ScoredItem {
            item_id: e.id.clone(),
            score: e.score,
        })
        .collect();
    let bins = bin_by_cci(&items, args.bin_width, args.lower_catchall)?;
    let table = stratified_accuracy(&bins, &predictions)?;
    write_output(out, &to_line(&table))?;
    eprint!("{}", render_stratification(&table));
    Ok(table)
}

pub fn generate(config: &ExperimentConfig, args: &GenerateArgs, out: Option<&Path>) -> Result<usize, CliError> {
    let scorer = build_scorer(config)?;
    let loaded = scorer.generate_corpus(args.kind.into())?;
    for w in &loaded.warnings {
        eprintln!("warning: {}", serde_json::to_string(w).expect("warnings serialize"));
    }
    let mut bytes = Vec::new();
    write_jsonl(&mut bytes, &loaded.records).expect("writing to memory");
    write_output(out, &bytes)?;
    eprintln!(
        "generated {} sentences; backend calls: {}",
        loaded.records.len(),
        scorer.backend_calls()
    );
    Ok(loaded.records.len())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CacheReport {
    pub path: PathBuf,
    #[serde(flatten)]
    pub stats: cci_core::cache::CacheStats,
}

pub fn cache_inspect(config: &ExperimentConfig, out: Option<&Path>) -> Result<CacheReport, CliError> {
    let cache = ScoreCache::open_read_only(&config.exp_dir)?;
    let report = CacheReport {
        path: cache.path().expect("file-backed").to_path_buf(),
        stats: cache.stats(),
    };
    write_output(out, &to_line(&report))?;
    Ok(report)
}
