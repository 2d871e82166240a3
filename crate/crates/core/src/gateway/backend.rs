use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::http::HttpChatBackend;
use crate::error::BackendError;
use crate::sha256_hex;

pub const DEFAULT_API_KEY_ENV: &str = "CCI_API_KEY";
pub const DEFAULT_TEMPERATURE: f64 = 0.7;
pub const DEFAULT_MAX_RETRIES: u32 = 3;
/// Enough room for a 19-country score map plus some stray reasoning text.
pub const DEFAULT_MAX_TOKENS: u32 = 2048;

/// Text returned by one completion call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawResponse {
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, Value>,
}

impl RawResponse {
    pub fn new(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            metadata: BTreeMap::new(),
        }
    }
}

/// A source of completions. Implementations are shared across worker threads.
pub trait Backend: Send + Sync {
    fn complete(&self, prompt: &str, run_index: u32) -> Result<RawResponse, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    HttpChat,
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub backend: BackendKind,
    pub model_id: String,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
    pub temperature: f64,
    pub max_retries: u32,
    pub timeout_secs: f64,
    pub max_tokens: u32,
    pub requests_per_second: Option<f64>,
    /// First retry delay; doubles on every further attempt.
    pub backoff_ms: u64,
    pub fixture: Option<PathBuf>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::HttpChat,
            model_id: String::new(),
            endpoint: None,
            api_key_env: DEFAULT_API_KEY_ENV.to_owned(),
            temperature: DEFAULT_TEMPERATURE,
            max_retries: DEFAULT_MAX_RETRIES,
            timeout_secs: 120.0,
            max_tokens: DEFAULT_MAX_TOKENS,
            requests_per_second: None,
            backoff_ms: 500,
            fixture: None,
        }
    }
}

impl BackendConfig {
    pub fn scripted(fixture: impl Into<PathBuf>) -> Self {
        Self {
            backend: BackendKind::Scripted,
            model_id: "scripted".to_owned(),
            fixture: Some(fixture.into()),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(BackendError::Config(format!(
                "temperature must be a non-negative number, got {}",
                self.temperature
            )));
        }
        if !(self.timeout_secs > 0.0 && self.timeout_secs.is_finite()) {
            return Err(BackendError::Config("timeout must be positive".into()));
        }
        if let Some(rps) = self.requests_per_second {
            if !(rps > 0.0 && rps.is_finite()) {
                return Err(BackendError::Config("requests_per_second must be positive".into()));
            }
        }
        match self.backend {
            BackendKind::HttpChat => {
                if self.endpoint.as_deref().is_none_or(str::is_empty) {
                    return Err(BackendError::Config("http-chat backend requires an endpoint".into()));
                }
                if self.model_id.is_empty() {
                    return Err(BackendError::Config("http-chat backend requires a model id".into()));
                }
            }
            BackendKind::Scripted => {
                if self.fixture.is_none() {
                    return Err(BackendError::Config("scripted backend requires a fixture path".into()));
                }
            }
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs_f64(self.timeout_secs)
    }
}

/// Builds the backend described by `config`.
pub fn build_backend(config: &BackendConfig) -> Result<Arc<dyn Backend>, BackendError> {
    config.validate()?;
    Ok(match config.backend {
        BackendKind::HttpChat => Arc::new(HttpChatBackend::new(config)?),
        BackendKind::Scripted => {
            let path = config.fixture.as_deref().expect("validated above");
            Arc::new(ScriptedBackend::load(path)?)
        }
    })
}

/// One-shot completion without keeping the backend around.
pub fn complete(
    prompt: &str,
    config: &BackendConfig,
    run_index: u32,
) -> Result<RawResponse, BackendError> {
    build_backend(config)?.complete(prompt, run_index)
}

/// One line of a scripted-backend fixture file.
///
/// A record without `run_index` answers every run of its prompt that has no
/// more specific record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub prompt_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_index: Option<u32>,
    pub response_text: String,
}

impl FixtureRecord {
    pub fn for_prompt(prompt: &str, run_index: Option<u32>, response_text: impl Into<String>) -> Self {
        Self {
            prompt_sha256: sha256_hex(prompt.as_bytes()),
            run_index,
            response_text: response_text.into(),
        }
    }
}

pub fn write_fixture(path: &Path, records: &[FixtureRecord]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Deterministic backend answering from a fixture keyed by prompt hash and run index.
#[derive(Debug, Default, Clone)]
pub struct ScriptedBackend {
    responses: HashMap<(String, Option<u32>), String>,
}

impl ScriptedBackend {
    pub fn from_records(records: impl IntoIterator<Item = FixtureRecord>) -> Result<Self, BackendError> {
        let mut responses = HashMap::new();
        for r in records {
            let key = (r.prompt_sha256.to_ascii_lowercase(), r.run_index);
            if let Some(previous) = responses.insert(key, r.response_text.clone()) {
                if previous != r.response_text {
                    return Err(BackendError::Config(format!(
                        "fixture has conflicting responses for prompt {} run {:?}",
                        r.prompt_sha256, r.run_index
                    )));
                }
            }
        }
        Ok(Self { responses })
    }

    pub fn load(path: &Path) -> Result<Self, BackendError> {
        let file = File::open(path).map_err(|e| {
            BackendError::Config(format!("cannot open fixture {}: {e}", path.display()))
        })?;
        let mut records = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| BackendError::Config(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: FixtureRecord = serde_json::from_str(&line).map_err(|e| {
                BackendError::Config(format!("{}:{}: {e}", path.display(), i + 1))
            })?;
            records.push(record);
        }
        Self::from_records(records)
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, prompt: &str, run_index: u32) -> Result<RawResponse, BackendError> {
        let hash = sha256_hex(prompt.as_bytes());
        let text = self
            .responses
            .get(&(hash.clone(), Some(run_index)))
            .or_else(|| self.responses.get(&(hash.clone(), None)))
            .ok_or(BackendError::FixtureMissing {
                prompt_sha256: hash,
                run_index,
            })?;
        let mut response = RawResponse::new(text.clone());
        response
            .metadata
            .insert("backend".into(), Value::String("scripted".into()));
        Ok(response)
    }
}
