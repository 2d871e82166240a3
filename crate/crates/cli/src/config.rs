//! Experiment configuration: TOML file, then flag overrides, then validation.

use std::path::{Path, PathBuf};

use cci_core::cultures::{global_cultures, parse_culture_list};
use cci_core::datasets::{JcmLabelText, McqFields, MoralFields};
use cci_core::gateway::{BackendConfig, PromptTemplates};
use cci_core::CultureSet;
use serde::{Deserialize, Serialize};

use crate::args::{InputFormat, Method, Mode, Overrides};
use crate::error::CliError;

pub const DEFAULT_RUNS: u32 = 3;
pub const DEFAULT_WORKERS: usize = 4;
pub const DEFAULT_EXP_DIR: &str = "cci-exp";

/// Number of entries in the global comparison scope.
pub const GLOBAL_CULTURE_COUNT: usize = 19;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub target: Option<String>,
    /// Comparison cultures, custom mode only.
    pub cultures: Option<Vec<String>>,
    /// Replacement for the built-in global list, one name per line.
    pub global_cultures_path: Option<PathBuf>,
    pub method: Method,
    pub neighbor_instruction: bool,
    pub n_runs: u32,
    pub workers: usize,
    pub exp_dir: PathBuf,
    pub templates_dir: Option<PathBuf>,
    pub input_format: InputFormat,
    pub backend: BackendConfig,
    pub jcm_labels: JcmLabelText,
    pub jcqa_fields: McqFields,
    pub jcm_fields: MoralFields,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Global,
            target: None,
            cultures: None,
            global_cultures_path: None,
            method: Method::Cci,
            neighbor_instruction: false,
            n_runs: DEFAULT_RUNS,
            workers: DEFAULT_WORKERS,
            exp_dir: PathBuf::from(DEFAULT_EXP_DIR),
            templates_dir: None,
            input_format: InputFormat::Labeled,
            backend: BackendConfig::default(),
            jcm_labels: JcmLabelText::default(),
            jcqa_fields: McqFields::default(),
            jcm_fields: MoralFields::default(),
        }
    }
}

fn rebase(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

impl ExperimentConfig {
    /// Reads a config file. Relative paths inside it are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: Self = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        rebase(base, &mut config.exp_dir);
        for p in [
            config.global_cultures_path.as_mut(),
            config.templates_dir.as_mut(),
            config.backend.fixture.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            rebase(base, p);
        }
        Ok(config)
    }

    /// Defaults, then the `--config` file if given, then the remaining flags.
    pub fn resolve(overrides: &Overrides) -> Result<Self, CliError> {
        let mut config = match &overrides.config {
            Some(path) => Self::load(path)?,
            None => Self::default(),
        };
        config.apply(overrides);
        config.validate()?;
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = o.mode {
            self.mode = v;
        }
        if let Some(v) = &o.target {
            self.target = Some(v.clone());
        }
        if let Some(v) = &o.cultures {
            self.cultures = Some(v.iter().map(|c| c.trim().to_owned()).collect());
        }
        if let Some(v) = o.method {
            self.method = v;
        }
        if o.neighbor_instruction {
            self.neighbor_instruction = true;
        }
        if let Some(v) = o.runs {
            self.n_runs = v;
        }
        if let Some(v) = o.workers {
            self.workers = v;
        }
        if let Some(v) = &o.exp_dir {
            self.exp_dir = v.clone();
        }
        if let Some(v) = &o.templates_dir {
            self.templates_dir = Some(v.clone());
        }
        if let Some(v) = o.backend {
            self.backend.backend = v.into();
        }
        if let Some(v) = &o.model {
            self.backend.model_id = v.clone();
        }
        if let Some(v) = &o.endpoint {
            self.backend.endpoint = Some(v.clone());
        }
        if let Some(v) = &o.fixture {
            self.backend.fixture = Some(v.clone());
        }
        if let Some(v) = &o.api_key_env {
            self.backend.api_key_env = v.clone();
        }
    }

    /// Checks that do not depend on which command runs.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_runs == 0 {
            return Err(CliError::Config("runs must be at least 1".into()));
        }
        if self.workers == 0 {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        self.jcm_labels
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.neighbor_instruction && self.method == Method::Cci {
            tracing::warn!("the neighbor instruction only affects the baseline method; ignored");
        }
        Ok(())
    }

    /// Backend settings, validated. The scripted backend defaults its model id.
    pub fn backend_config(&self) -> Result<BackendConfig, CliError> {
        let mut backend = self.backend.clone();
        if backend.model_id.is_empty() && backend.backend == cci_core::gateway::BackendKind::Scripted {
            backend.model_id = "scripted".into();
        }
        backend.validate()?;
        Ok(backend)
    }

    pub fn target(&self) -> Result<&str, CliError> {
        self.target
            .as_deref()
            .filter(|t| !t.is_empty())
            .ok_or_else(|| CliError::Config("a target culture is required (--target)".into()))
    }

    /// The comparison scope for the configured mode.
    pub fn culture_set(&self) -> Result<CultureSet, CliError> {
        let target = self.target()?;
        match self.mode {
            Mode::Global => {
                if self.cultures.is_some() {
                    tracing::warn!("explicit cultures are ignored in global mode");
                }
                let list = self.global_cultures()?;
                if !list.iter().any(|c| c == target) {
                    return Err(CliError::Config(format!(
                        "target {target:?} is not in the global culture list"
                    )));
                }
                CultureSet::new(list, target).map_err(|e| CliError::Config(e.to_string()))
            }
            Mode::Custom => {
                let list = self.cultures.clone().ok_or_else(|| {
                    CliError::Config("custom mode requires a culture list (--cultures)".into())
                })?;
                CultureSet::new(list, target).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }

    pub fn global_cultures(&self) -> Result<Vec<String>, CliError> {
        let Some(path) = &self.global_cultures_path else {
            return Ok(global_cultures());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let list = parse_culture_list(&text);
        if list.len() != GLOBAL_CULTURE_COUNT {
            tracing::warn!(
                count = list.len(),
                "global culture list does not have {GLOBAL_CULTURE_COUNT} entries"
            );
        }
        Ok(list)
    }

    pub fn templates(&self) -> Result<PromptTemplates, CliError> {
        match &self.templates_dir {
            Some(dir) => Ok(PromptTemplates::load_dir(dir)?),
            None => Ok(PromptTemplates::default()),
        }
    }
}
