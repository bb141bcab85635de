//! Experiment configuration: one TOML file drives a whole run.
//!
//! Every default is materialized after parsing so the manifest snapshot is
//! explicit about what actually ran.

use crate::agents::wire::BackendConfig;
use crate::corpus::DatasetFormat;
use crate::embeddings;
use crate::evaluation::F1Averaging;
use crate::selection::SelectionSpec;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Unreadable { path: String, reason: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetsConfig {
    pub test: PathBuf,
    pub pool: PathBuf,
    #[serde(default = "default_format")]
    pub format: DatasetFormat,
}

fn default_format() -> DatasetFormat {
    DatasetFormat::Tsv
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingProviderKind {
    /// Deterministic hashed-trigram embedder; no network.
    Fallback,
    /// Remote batch endpoint.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingsConfig {
    #[serde(default = "default_provider_kind")]
    pub provider: EmbeddingProviderKind,
    /// Dimension of the fallback embedder.
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub endpoint: Option<String>,
    #[serde(default = "default_embedding_model")]
    pub model_id: String,
    #[serde(default)]
    pub auth_env: Option<String>,
}

fn default_provider_kind() -> EmbeddingProviderKind {
    EmbeddingProviderKind::Fallback
}

fn default_dim() -> usize {
    embeddings::DEFAULT_FALLBACK_DIM
}

fn default_embedding_model() -> String {
    embeddings::DEFAULT_REMOTE_MODEL_ID.to_string()
}

impl Default for EmbeddingsConfig {
    fn default() -> Self {
        EmbeddingsConfig {
            provider: default_provider_kind(),
            dim: default_dim(),
            endpoint: None,
            model_id: default_embedding_model(),
            auth_env: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub backend: BackendConfig,
    #[serde(default = "default_attempts")]
    pub n_attempts: u32,
}

fn default_attempts() -> u32 {
    crate::agents::DEFAULT_GENERATION_ATTEMPTS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub backend: BackendConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Built-in template ids and/or the word "generated".
    pub template_ids: Vec<String>,
    #[serde(default = "default_merge_threshold")]
    pub merge_threshold: f64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_tolerance")]
    pub reference_tolerance_pct: f64,
    #[serde(default)]
    pub f1_averaging: F1Averaging,
}

fn default_merge_threshold() -> f64 {
    crate::agents::DEFAULT_MERGE_THRESHOLD
}

fn default_parallelism() -> usize {
    4
}

fn default_tolerance() -> f64 {
    3.0
}

pub const GENERATED_TEMPLATE_KEYWORD: &str = "generated";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub datasets: DatasetsConfig,
    pub selection: SelectionSpec,
    #[serde(default)]
    pub embeddings: EmbeddingsConfig,
    #[serde(default)]
    pub generator: Option<GeneratorConfig>,
    pub classifier: ClassifierConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Parse a TOML config, resolve paths relative to its directory, fill in
    /// role-specific temperature defaults, and validate.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Unreadable {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let mut config: ExperimentConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        config.materialize();
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.datasets.test,
            &mut self.datasets.pool,
            &mut self.run.cache_dir,
            &mut self.run.output_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    /// Fill role defaults: classification runs at temperature 0.0,
    /// generation at 0.7, unless the config pinned them.
    pub fn materialize(&mut self) {
        self.classifier.backend.temperature.get_or_insert(0.0);
        if let Some(generator) = &mut self.generator {
            generator
                .backend
                .temperature
                .get_or_insert(crate::agents::DEFAULT_GENERATION_TEMPERATURE);
        }
    }

    pub fn wants_generated_templates(&self) -> bool {
        self.run
            .template_ids
            .iter()
            .any(|id| id == GENERATED_TEMPLATE_KEYWORD)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.selection
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.classifier
            .backend
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(generator) = &self.generator {
            generator
                .backend
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if generator.n_attempts == 0 {
                return Err(ConfigError::Invalid(
                    "generator.n_attempts must be at least 1".into(),
                ));
            }
        }
        if self.run.template_ids.is_empty() {
            return Err(ConfigError::Invalid(
                "run.template_ids must not be empty".into(),
            ));
        }
        if self.wants_generated_templates() && self.generator.is_none() {
            return Err(ConfigError::Invalid(
                "template_ids includes \"generated\" but no [generator] backend is configured"
                    .into(),
            ));
        }
        for id in &self.run.template_ids {
            if id != GENERATED_TEMPLATE_KEYWORD && crate::agents::builtin_template(id).is_none() {
                return Err(ConfigError::Invalid(format!(
                    "unknown template id {id:?}; expected a built-in id or \"generated\""
                )));
            }
        }
        if !(self.run.merge_threshold > 0.0 && self.run.merge_threshold <= 1.0) {
            return Err(ConfigError::Invalid(format!(
                "merge_threshold must be in (0, 1], got {}",
                self.run.merge_threshold
            )));
        }
        if self.run.parallelism == 0 {
            return Err(ConfigError::Invalid(
                "run.parallelism must be at least 1".into(),
            ));
        }
        if self.embeddings.provider == EmbeddingProviderKind::Remote
            && self.embeddings.endpoint.is_none()
        {
            return Err(ConfigError::Invalid(
                "embeddings.provider = \"remote\" needs embeddings.endpoint".into(),
            ));
        }
        Ok(())
    }
}
