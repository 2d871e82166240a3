//! Sentence scoring: N cached elicitations, aggregated into a CCI result.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use serde::Serialize;

use super::backend::{build_backend, Backend, BackendConfig, RawResponse};
use super::parse::{parse_baseline_response, parse_generality_response, Parsed};
use super::prompts::{GenerationKind, PromptTemplates};
use crate::cache::{CacheKey, ScoreCache, ScoreRecord};
use crate::datasets::{corpus_from_texts, parse_corpus_response, LabeledSentence, Loaded};
use crate::cci::{aggregate_runs, compute_cci_with_log, CciResult, CultureSet};
use crate::error::{ParseError, ScoreError};

/// Everything about a backend that feeds the cache key or the retry budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorerSettings {
    pub model_id: String,
    pub temperature: f64,
    pub max_retries: u32,
}

impl From<&BackendConfig> for ScorerSettings {
    fn from(c: &BackendConfig) -> Self {
        Self {
            model_id: c.model_id.clone(),
            temperature: c.temperature,
            max_retries: c.max_retries,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineResult {
    pub score: f64,
    pub n_runs: u32,
}

pub struct Scorer {
    backend: Arc<dyn Backend>,
    cache: Arc<ScoreCache>,
    templates: PromptTemplates,
    settings: ScorerSettings,
    calls: AtomicUsize,
}

impl Scorer {
    pub fn new(
        backend: Arc<dyn Backend>,
        cache: Arc<ScoreCache>,
        templates: PromptTemplates,
        settings: ScorerSettings,
    ) -> Self {
        Self {
            backend,
            cache,
            templates,
            settings,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_config(
        config: &BackendConfig,
        cache: Arc<ScoreCache>,
        templates: PromptTemplates,
    ) -> Result<Self, ScoreError> {
        let backend = build_backend(config)?;
        Ok(Self::new(backend, cache, templates, config.into()))
    }

    /// Backend calls made so far (cache hits excluded).
    pub fn backend_calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn templates(&self) -> &PromptTemplates {
        &self.templates
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    /// One elicitation for `run_index`: cache first, then up to
    /// `1 + max_retries` completions until one parses.
    fn elicit<T>(
        &self,
        prompt: &str,
        run_index: u32,
        parse: impl Fn(&RawResponse) -> Result<Parsed<T>, ParseError>,
    ) -> Result<T, ScoreError> {
        self.elicit_record(prompt, run_index, parse).map(|(value, _)| value)
    }

    /// [`Self::elicit`], also returning when the response was first recorded.
    fn elicit_record<T>(
        &self,
        prompt: &str,
        run_index: u32,
        parse: impl Fn(&RawResponse) -> Result<Parsed<T>, ParseError>,
    ) -> Result<(T, String), ScoreError> {
        let key = CacheKey::new(
            prompt,
            &self.settings.model_id,
            run_index,
            self.settings.temperature,
        );
        if let Some(record) = self.cache.get(&key)? {
            let raw = RawResponse {
                text: record.response_text,
                metadata: record.backend_metadata,
            };
            return parse(&raw).map(|p| (p.value, record.created_at)).map_err(|source| ScoreError::Parse {
                run_index,
                attempts: 0,
                source,
            });
        }

        let attempts = 1 + self.settings.max_retries;
        let mut last_error = ParseError::NoJsonFound;
        for attempt in 1..=attempts {
            self.calls.fetch_add(1, Ordering::Relaxed);
            let raw = self.backend.complete(prompt, run_index)?;
            match parse(&raw) {
                Ok(parsed) => {
                    let mut record = ScoreRecord::new(key, raw.text);
                    record.backend_metadata = raw.metadata;
                    let created_at = record.created_at.clone();
                    self.cache.put(record)?;
                    return Ok((parsed.value, created_at));
                }
                Err(e) => {
                    tracing::warn!(run_index, attempt, error = %e, "unparseable response");
                    last_error = e;
                }
            }
        }
        Err(ScoreError::Parse {
            run_index,
            attempts,
            source: last_error,
        })
    }

    /// Elicits generality over `cultures` for runs `1..=n_runs`, averages, and
    /// computes both CCI and its log-softmax variant.
    pub fn score_sentence(
        &self,
        sentence: &str,
        cultures: &CultureSet,
        n_runs: u32,
    ) -> Result<CciResult, ScoreError> {
        if n_runs == 0 {
            return Err(ScoreError::NoRuns);
        }
        let prompt = self.templates.render_generality(sentence, cultures)?;
        let runs = (1..=n_runs)
            .map(|run| self.elicit(&prompt, run, |raw| parse_generality_response(raw, cultures)))
            .collect::<Result<Vec<_>, _>>()?;
        let aggregated = aggregate_runs(&runs, cultures)?;
        Ok(compute_cci_with_log(&aggregated, cultures)?)
    }

    /// Direct specificity score, averaged over `n_runs` elicitations.
    pub fn score_baseline(
        &self,
        sentence: &str,
        target: &str,
        neighbor_instruction: bool,
        n_runs: u32,
    ) -> Result<BaselineResult, ScoreError> {
        if n_runs == 0 {
            return Err(ScoreError::NoRuns);
        }
        let prompt = self
            .templates
            .render_baseline(sentence, target, neighbor_instruction)?;
        let mut total = 0.0;
        for run in 1..=n_runs {
            total += self.elicit(&prompt, run, parse_baseline_response)?;
        }
        Ok(BaselineResult {
            score: total / f64::from(n_runs),
            n_runs,
        })
    }
}

impl Scorer {
    /// Cached corpus generation: a rerun returns the same sentences and timestamp.
    pub fn generate_corpus(&self, kind: GenerationKind) -> Result<Loaded<LabeledSentence>, ScoreError> {
        let prompt = self.templates.render_generation(kind);
        let model_id = &self.settings.model_id;
        let ((texts, warnings), generated_at) = self.elicit_record(&prompt, 1, |raw| {
            parse_corpus_response(&raw.text).map(|value| Parsed {
                value,
                warnings: Vec::new(),
            })
        })?;
        let mut loaded = corpus_from_texts(kind, &prompt, texts, model_id, generated_at);
        loaded.warnings.splice(0..0, warnings);
        Ok(loaded)
    }
}

/// Convenience form building a backend from `config` for a single sentence.
pub fn score_sentence(
    sentence: &str,
    cultures: &CultureSet,
    n_runs: u32,
    config: &BackendConfig,
    cache: Arc<ScoreCache>,
) -> Result<CciResult, ScoreError> {
    Scorer::from_config(config, cache, PromptTemplates::default())?
        .score_sentence(sentence, cultures, n_runs)
}

/// Applies `f` to every item with at most `workers` threads; results keep input order.
pub fn run_bounded<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(item) = items.get(i) else { break };
                        done.push((i, f(item)));
                    }
                    done
                })
            })
            .collect();
        for handle in handles {
            for (i, r) in handle.join().expect("scoring worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots
        .into_iter()
        .map(|r| r.expect("every index is claimed once"))
        .collect()
}
