//! Config-driven orchestration: corpus -> selection -> agents -> evaluation,
//! with caching, stored predictions, and reproducible report emission.

pub mod cli;
pub mod config;
pub mod report;

pub use config::{ConfigError, ExperimentConfig};
pub use report::{
    emit_all_formats, emit_report, read_predictions, write_predictions, Report, ReportFormat,
    ReportRow, RunManifest, ShotRecord,
};

use crate::agents::{
    self, classify_dataset, generate_candidate_prompts, merge_similar_prompts, ChatBackend,
    CompletionSource, HttpBackend, PredictionRecord, PromptTemplate, ResponseCache, StubBackend,
};
use crate::corpus::{self, Dataset, Split};
use crate::embeddings::{
    CachedEmbedder, EmbeddingCache, EmbeddingProvider, RemoteEmbedder, RemoteEmbedderConfig,
    ScoredPair, TrigramEmbedder,
};
use crate::evaluation::{
    compare_to_reference, compute_metrics, confusion, error_buckets, find_reference, ErrorKind,
};
use crate::selection::{self, FewShotSet, SelectionStrategy};
use config::{EmbeddingProviderKind, GENERATED_TEMPLATE_KEYWORD};
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

/// Where in the pipeline an error happened; prefixed onto every message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Corpus,
    Embeddings,
    Selection,
    Generation,
    Classification,
    Evaluation,
    Emit,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Corpus => "corpus",
            Stage::Embeddings => "embeddings",
            Stage::Selection => "selection",
            Stage::Generation => "generation",
            Stage::Classification => "classification",
            Stage::Evaluation => "evaluation",
            Stage::Emit => "emit",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("[{stage}] {message}")]
    Stage { stage: Stage, message: String },
}

fn at_stage<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

/// A ready-to-run experiment: config plus live backends. Tests can inject
/// their own backends; `from_config` builds them from the endpoints.
pub struct Pipeline {
    pub config: ExperimentConfig,
    pub classifier: Arc<dyn ChatBackend>,
    pub generator: Option<Arc<dyn ChatBackend>>,
}

/// Everything a finished run produced.
pub struct RunOutcome {
    pub report: Report,
    pub manifest: RunManifest,
    pub report_paths: Vec<PathBuf>,
    pub manifest_path: PathBuf,
}

pub fn build_backend(cfg: &agents::BackendConfig) -> Result<Arc<dyn ChatBackend>, PipelineError> {
    if cfg.endpoint.starts_with("stub://") {
        Ok(Arc::new(
            StubBackend::from_config(cfg.clone())
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        ))
    } else {
        Ok(Arc::new(
            HttpBackend::new(cfg.clone()).map_err(|e| ConfigError::Invalid(e.to_string()))?,
        ))
    }
}

impl Pipeline {
    pub fn from_config(config: ExperimentConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let classifier = build_backend(&config.classifier.backend)?;
        let generator = match &config.generator {
            Some(g) => Some(build_backend(&g.backend)?),
            None => None,
        };
        Ok(Pipeline {
            config,
            classifier,
            generator,
        })
    }

    pub fn load(path: &std::path::Path) -> Result<Self, PipelineError> {
        Pipeline::from_config(ExperimentConfig::load(path)?)
    }

    fn embedder(&self) -> Result<CachedEmbedder, PipelineError> {
        let cfg = &self.config.embeddings;
        let inner: Box<dyn EmbeddingProvider> = match cfg.provider {
            EmbeddingProviderKind::Fallback => Box::new(TrigramEmbedder::new(cfg.dim)),
            EmbeddingProviderKind::Remote => Box::new(RemoteEmbedder::new(RemoteEmbedderConfig {
                endpoint: cfg.endpoint.clone().expect("validated"),
                model_id: cfg.model_id.clone(),
                auth_env: cfg.auth_env.clone(),
            })),
        };
        let cache = EmbeddingCache::open(&self.config.run.cache_dir.join("embeddings"))
            .map_err(at_stage(Stage::Embeddings))?;
        Ok(CachedEmbedder::new(inner, cache))
    }

    fn load_datasets(&self) -> Result<(Dataset, Dataset), PipelineError> {
        let format = self.config.datasets.format;
        let test = corpus::load_dataset(&self.config.datasets.test, format)
            .map_err(at_stage(Stage::Corpus))?
            .with_split(Split::TestSet);
        let pool = corpus::load_dataset(&self.config.datasets.pool, format)
            .map_err(at_stage(Stage::Corpus))?
            .with_split(Split::SelectionPool);
        let overlap = test.overlapping_ids(&pool);
        if !overlap.is_empty() {
            return Err(PipelineError::Stage {
                stage: Stage::Corpus,
                message: format!(
                    "test set and selection pool share {} id(s), e.g. {}",
                    overlap.len(),
                    overlap[0]
                ),
            });
        }
        Ok((test, pool))
    }

    async fn pool_scores(
        &self,
        pool: &Dataset,
        embedder: &CachedEmbedder,
    ) -> Result<Option<Vec<ScoredPair>>, PipelineError> {
        match self.config.selection.strategy {
            SelectionStrategy::Sorted | SelectionStrategy::Borderline => {
                let scores =
                    crate::embeddings::score_pairs(pool, embedder, self.config.run.parallelism)
                        .await
                        .map_err(at_stage(Stage::Embeddings))?;
                Ok(Some(scores))
            }
            _ => Ok(None),
        }
    }

    /// Selection as the full pipeline performs it (scores computed only when
    /// the strategy needs them).
    pub async fn select_shots(&self) -> Result<FewShotSet, PipelineError> {
        let (test, pool) = self.load_datasets()?;
        let embedder = self.embedder()?;
        let scores = self.pool_scores(&pool, &embedder).await?;
        let shots = selection::select(&pool, scores.as_deref(), &self.config.selection)
            .map_err(at_stage(Stage::Selection))?;
        check_shots_disjoint(&shots, &test)?;
        Ok(shots)
    }

    /// Run agent 1 and merge near-duplicates.
    pub async fn generate_templates(
        &self,
        shots: &FewShotSet,
        source: &CompletionSource<'_>,
    ) -> Result<Vec<PromptTemplate>, PipelineError> {
        let generator =
            self.generator
                .as_ref()
                .ok_or(PipelineError::Config(ConfigError::Invalid(
                    "no [generator] backend configured".into(),
                )))?;
        let n_attempts = self
            .config
            .generator
            .as_ref()
            .map(|g| g.n_attempts)
            .unwrap_or(1);
        let candidates = generate_candidate_prompts(source, generator.as_ref(), shots, n_attempts)
            .await
            .map_err(at_stage(Stage::Generation))?;
        Ok(merge_similar_prompts(
            candidates,
            self.config.run.merge_threshold,
        ))
    }

    /// Resolve the configured template list, running generation for the
    /// "generated" keyword.
    pub async fn resolve_templates(
        &self,
        shots: &FewShotSet,
        source: &CompletionSource<'_>,
    ) -> Result<Vec<PromptTemplate>, PipelineError> {
        let mut templates = Vec::new();
        for id in &self.config.run.template_ids {
            if id == GENERATED_TEMPLATE_KEYWORD {
                templates.extend(self.generate_templates(shots, source).await?);
            } else {
                templates.push(agents::builtin_template(id).ok_or_else(|| {
                    PipelineError::Config(ConfigError::Invalid(format!("unknown template {id}")))
                })?);
            }
        }
        Ok(templates)
    }

    /// The full experiment: select once, generate once if asked, classify
    /// every test pair under every template, score, persist, emit.
    pub async fn run(&self) -> Result<RunOutcome, PipelineError> {
        let started_at = chrono::Utc::now().to_rfc3339();
        let run_cfg = &self.config.run;
        let (test, pool) = self.load_datasets()?;
        corpus::validate_balance(&pool).map_err(at_stage(Stage::Corpus))?;
        corpus::validate_balance(&test).map_err(at_stage(Stage::Corpus))?;

        let embedder = self.embedder()?;
        let scores = self.pool_scores(&pool, &embedder).await?;
        let shots = selection::select(&pool, scores.as_deref(), &self.config.selection)
            .map_err(at_stage(Stage::Selection))?;
        check_shots_disjoint(&shots, &test)?;

        let response_cache = ResponseCache::open(&run_cfg.cache_dir.join("responses"))
            .map_err(at_stage(Stage::Classification))?;
        let source = CompletionSource::cached(&response_cache);

        let templates = self.resolve_templates(&shots, &source).await?;

        let mut rows = Vec::with_capacity(templates.len());
        for template in &templates {
            let records = classify_dataset(
                &source,
                self.classifier.as_ref(),
                template,
                &shots,
                &test,
                run_cfg.parallelism,
            )
            .await
            .map_err(at_stage(Stage::Classification))?;

            write_predictions(
                &run_cfg.output_dir,
                self.classifier.name(),
                &template.id,
                &records,
            )
            .map_err(at_stage(Stage::Emit))?;

            rows.push(self.score_template(template, &records, &test)?);
        }

        let report = Report::new(rows, run_cfg.f1_averaging);
        let report_paths =
            emit_all_formats(&report, &run_cfg.output_dir).map_err(at_stage(Stage::Emit))?;

        let manifest = RunManifest {
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
            config: self.config.clone(),
            few_shot: shots
                .examples()
                .iter()
                .map(|e| ShotRecord {
                    id: e.pair.id.clone(),
                    label: e.label,
                    score: e.score,
                })
                .collect(),
            templates,
            response_cache: response_cache.stats(),
            embedding_cache: crate::agents::CacheStats {
                hits: embedder.hits(),
                misses: embedder.misses(),
            },
        };
        let manifest_path = manifest
            .write(&run_cfg.output_dir)
            .map_err(at_stage(Stage::Emit))?;

        Ok(RunOutcome {
            report,
            manifest,
            report_paths,
            manifest_path,
        })
    }

    /// Score one template's predictions into a report row.
    pub fn score_template(
        &self,
        template: &PromptTemplate,
        records: &[PredictionRecord],
        test: &Dataset,
    ) -> Result<ReportRow, PipelineError> {
        let cm = confusion(records, test).map_err(at_stage(Stage::Evaluation))?;
        let metrics = compute_metrics(&cm).map_err(at_stage(Stage::Evaluation))?;
        let buckets = error_buckets(records, test).map_err(at_stage(Stage::Evaluation))?;
        report::write_error_records(&self.config.run.output_dir, &template.id, &buckets)
            .map_err(at_stage(Stage::Emit))?;
        let setup = format!("{} + {}", self.classifier.name(), template.id);
        let reference = find_reference(&setup).map(|row| {
            compare_to_reference(
                &metrics,
                self.config.run.f1_averaging,
                row,
                self.config.run.reference_tolerance_pct,
            )
        });
        Ok(ReportRow {
            template_id: template.id.clone(),
            backend: self.classifier.name().to_string(),
            metrics,
            confusion: cm,
            false_positives: buckets
                .iter()
                .filter(|b| b.kind == ErrorKind::FalsePositive)
                .count(),
            false_negatives: buckets
                .iter()
                .filter(|b| b.kind == ErrorKind::FalseNegative)
                .count(),
            unparsed: buckets
                .iter()
                .filter(|b| b.kind == ErrorKind::Unparsed)
                .count(),
            reference,
        })
    }

    /// Rebuild the report from stored prediction files, without any backend.
    pub fn rebuild_report_from_disk(&self) -> Result<Report, PipelineError> {
        let (test, _) = self.load_datasets()?;
        let predictions_dir = self.config.run.output_dir.join("predictions");
        let mut rows = Vec::new();
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&predictions_dir)
            .map_err(at_stage(Stage::Evaluation))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        entries.sort();
        for path in entries {
            let records = read_predictions(&path).map_err(at_stage(Stage::Evaluation))?;
            let Some(first) = records.first() else {
                continue;
            };
            let template_id = first.template_id.clone();
            let template = agents::builtin_template(&template_id).unwrap_or_else(|| {
                // generated templates are scored from records alone
                PromptTemplate {
                    id: template_id.clone(),
                    origin: agents::TemplateOrigin::Generated {
                        backend: self
                            .generator
                            .as_ref()
                            .map(|g| g.name().to_string())
                            .unwrap_or_else(|| "unknown".into()),
                    },
                    instruction: String::new(),
                    answer_format: agents::AnswerFormat::YesNo,
                    shape: agents::PairShape::Statements,
                    raw_response: None,
                }
            });
            rows.push(self.score_template(&template, &records, &test)?);
        }
        Ok(Report::new(rows, self.config.run.f1_averaging))
    }
}

fn check_shots_disjoint(shots: &FewShotSet, test: &Dataset) -> Result<(), PipelineError> {
    let test_ids: std::collections::HashSet<&str> = test.ids().collect();
    if let Some(id) = shots.ids().find(|id| test_ids.contains(id)) {
        return Err(PipelineError::Stage {
            stage: Stage::Selection,
            message: format!("few-shot example {id} is also in the test set"),
        });
    }
    Ok(())
}
