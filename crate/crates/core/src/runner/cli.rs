//! Command-line surface over the pipeline.

use super::config::ExperimentConfig;
use super::report::{emit_all_formats, read_predictions};
use super::{Pipeline, PipelineError, Stage};
use crate::agents::{CompletionSource, ResponseCache};
use crate::corpus::{self};
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "claimmatch",
    version,
    about = "Agent-based few-shot claim matching: generate prompts, classify claim pairs, score runs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the config and datasets without touching any backend.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print the few-shot examples the configured strategy picks.
    Select {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the prompt-generation agent and print the merged templates.
    Genprompt {
        #[arg(long)]
        config: PathBuf,
    },
    /// Classify the test set under one template and store the predictions.
    Classify {
        #[arg(long)]
        config: PathBuf,
        /// Built-in template id, or a generated id (e.g. G1) after genprompt.
        #[arg(long)]
        template: String,
    },
    /// Score stored predictions and print the metrics.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// Predictions file; defaults to every file under output_dir/predictions.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Full pipeline: select, generate if configured, classify, score, emit.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-emit the report files from stored predictions.
    Report {
        #[arg(long)]
        config: PathBuf,
    },
}

pub async fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Validate { config } => validate(config),
        Command::Select { config } => select(config).await,
        Command::Genprompt { config } => genprompt(config).await,
        Command::Classify { config, template } => classify(config, template).await,
        Command::Evaluate {
            config,
            predictions,
        } => evaluate(config, predictions),
        Command::Run { config } => run(config).await,
        Command::Report { config } => report(config),
    }
}

fn stage_err<E: std::fmt::Display>(stage: Stage) -> impl FnOnce(E) -> PipelineError {
    move |e| PipelineError::Stage {
        stage,
        message: e.to_string(),
    }
}

fn validate(config: PathBuf) -> Result<(), PipelineError> {
    let cfg = ExperimentConfig::load(&config)?;
    let format = cfg.datasets.format;
    let test =
        corpus::load_dataset(&cfg.datasets.test, format).map_err(stage_err(Stage::Corpus))?;
    let pool =
        corpus::load_dataset(&cfg.datasets.pool, format).map_err(stage_err(Stage::Corpus))?;
    let test_summary = corpus::validate_balance(&test).map_err(stage_err(Stage::Corpus))?;
    let pool_summary = corpus::validate_balance(&pool).map_err(stage_err(Stage::Corpus))?;
    let overlap = test.overlapping_ids(&pool);
    if !overlap.is_empty() {
        return Err(PipelineError::Stage {
            stage: Stage::Corpus,
            message: format!("test and pool share {} id(s)", overlap.len()),
        });
    }
    println!(
        "test: {} pairs ({} match / {} not_match, balanced: {})",
        test.len(),
        test_summary.match_count,
        test_summary.no_match_count,
        test_summary.balanced
    );
    println!(
        "pool: {} pairs ({} match / {} not_match, balanced: {})",
        pool.len(),
        pool_summary.match_count,
        pool_summary.no_match_count,
        pool_summary.balanced
    );
    println!("test/pool ids disjoint: true");
    println!("config ok");
    Ok(())
}

async fn select(config: PathBuf) -> Result<(), PipelineError> {
    let pipeline = Pipeline::load(&config)?;
    let shots = pipeline.select_shots().await?;
    println!(
        "strategy: {:?}, k = {}",
        pipeline.config.selection.strategy,
        shots.k()
    );
    for example in shots.examples() {
        match example.score {
            Some(score) => println!("{}\t{}\tscore={score:.6}", example.pair.id, example.label),
            None => println!("{}\t{}", example.pair.id, example.label),
        }
    }
    Ok(())
}

async fn genprompt(config: PathBuf) -> Result<(), PipelineError> {
    let pipeline = Pipeline::load(&config)?;
    let shots = pipeline.select_shots().await?;
    let cache = ResponseCache::open(&pipeline.config.run.cache_dir.join("responses"))
        .map_err(stage_err(Stage::Generation))?;
    let source = CompletionSource::cached(&cache);
    let templates = pipeline.generate_templates(&shots, &source).await?;
    let out_path = pipeline
        .config
        .run
        .output_dir
        .join("generated_templates.json");
    std::fs::create_dir_all(&pipeline.config.run.output_dir).map_err(stage_err(Stage::Emit))?;
    std::fs::write(
        &out_path,
        serde_json::to_string_pretty(&templates).expect("templates serialize"),
    )
    .map_err(stage_err(Stage::Emit))?;
    println!("{} template(s) after merging:", templates.len());
    for t in &templates {
        println!("--- {} ---", t.id);
        println!("{}", t.instruction);
    }
    println!("saved to {}", out_path.display());
    Ok(())
}

fn load_generated_template(
    pipeline: &Pipeline,
    id: &str,
) -> Result<crate::agents::PromptTemplate, PipelineError> {
    let path = pipeline
        .config
        .run
        .output_dir
        .join("generated_templates.json");
    let text = std::fs::read_to_string(&path).map_err(|_| PipelineError::Stage {
        stage: Stage::Classification,
        message: format!(
            "template {id} is not built-in and {} does not exist; run genprompt first",
            path.display()
        ),
    })?;
    let templates: Vec<crate::agents::PromptTemplate> =
        serde_json::from_str(&text).map_err(stage_err(Stage::Classification))?;
    templates
        .into_iter()
        .find(|t| t.id == id)
        .ok_or_else(|| PipelineError::Stage {
            stage: Stage::Classification,
            message: format!("template {id} not found in {}", path.display()),
        })
}

async fn classify(config: PathBuf, template_id: String) -> Result<(), PipelineError> {
    let pipeline = Pipeline::load(&config)?;
    let template = match crate::agents::builtin_template(&template_id) {
        Some(t) => t,
        None => load_generated_template(&pipeline, &template_id)?,
    };
    let shots = pipeline.select_shots().await?;
    let (test, _) = pipeline.load_datasets()?;
    let cache = ResponseCache::open(&pipeline.config.run.cache_dir.join("responses"))
        .map_err(stage_err(Stage::Classification))?;
    let source = CompletionSource::cached(&cache);
    let records = crate::agents::classify_dataset(
        &source,
        pipeline.classifier.as_ref(),
        &template,
        &shots,
        &test,
        pipeline.config.run.parallelism,
    )
    .await
    .map_err(stage_err(Stage::Classification))?;
    let path = super::report::write_predictions(
        &pipeline.config.run.output_dir,
        pipeline.classifier.name(),
        &template.id,
        &records,
    )
    .map_err(stage_err(Stage::Emit))?;
    let row = pipeline.score_template(&template, &records, &test)?;
    println!(
        "{}: {} predictions, F1 {:.1}%, accuracy {:.1}%, unparsed {}",
        template.id,
        records.len(),
        super::report::pct1(row.metrics.f1(pipeline.config.run.f1_averaging)),
        super::report::pct1(row.metrics.accuracy),
        row.unparsed
    );
    println!("stored to {}", path.display());
    Ok(())
}

fn evaluate(config: PathBuf, predictions: Option<PathBuf>) -> Result<(), PipelineError> {
    let pipeline = Pipeline::load(&config)?;
    let (test, _) = pipeline.load_datasets()?;
    let paths: Vec<PathBuf> = match predictions {
        Some(p) => vec![p],
        None => {
            let dir = pipeline.config.run.output_dir.join("predictions");
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&dir)
                .map_err(|e| PipelineError::Stage {
                    stage: Stage::Evaluation,
                    message: format!("no stored predictions under {}: {e}", dir.display()),
                })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
                .collect();
            entries.sort();
            entries
        }
    };
    if paths.is_empty() {
        return Err(PipelineError::Stage {
            stage: Stage::Evaluation,
            message: "no prediction files to evaluate".into(),
        });
    }
    for path in paths {
        let records = read_predictions(&path).map_err(stage_err(Stage::Evaluation))?;
        let Some(first) = records.first() else {
            continue;
        };
        let template = crate::agents::builtin_template(&first.template_id)
            .or_else(|| load_generated_template(&pipeline, &first.template_id).ok())
            .unwrap_or_else(|| crate::agents::PromptTemplate {
                id: first.template_id.clone(),
                origin: crate::agents::TemplateOrigin::HandCrafted,
                instruction: String::new(),
                answer_format: crate::agents::AnswerFormat::YesNo,
                shape: crate::agents::PairShape::Statements,
                raw_response: None,
            });
        let row = pipeline.score_template(&template, &records, &test)?;
        println!(
            "{}\tF1 {:.1}%\tAcc {:.1}%\ttp={} fp={} tn={} fn={} unparsed={}",
            row.template_id,
            super::report::pct1(row.metrics.f1(pipeline.config.run.f1_averaging)),
            super::report::pct1(row.metrics.accuracy),
            row.confusion.true_pos,
            row.confusion.false_pos,
            row.confusion.true_neg,
            row.confusion.false_neg,
            row.unparsed,
        );
        if let Some(reference) = &row.reference {
            println!(
                "\tvs {}: F1 {:+.1}, Acc {:+.1} (tolerance ±{:.1}: {})",
                reference.setup,
                reference.f1_delta_pct,
                reference.acc_delta_pct,
                reference.tolerance_pct,
                if reference.within_tolerance {
                    "within"
                } else {
                    "outside"
                }
            );
        }
    }
    Ok(())
}

async fn run(config: PathBuf) -> Result<(), PipelineError> {
    let pipeline = Pipeline::load(&config)?;
    let outcome = pipeline.run().await?;
    print!("{}", outcome.report.render(super::ReportFormat::TableText));
    println!(
        "cache: {} hit(s), {} miss(es)",
        outcome.manifest.response_cache.hits, outcome.manifest.response_cache.misses
    );
    for path in &outcome.report_paths {
        println!("wrote {}", path.display());
    }
    println!("wrote {}", outcome.manifest_path.display());
    Ok(())
}

fn report(config: PathBuf) -> Result<(), PipelineError> {
    let pipeline = Pipeline::load(&config)?;
    let report = pipeline.rebuild_report_from_disk()?;
    let paths = emit_all_formats(&report, &pipeline.config.run.output_dir)
        .map_err(stage_err(Stage::Emit))?;
    print!("{}", report.render(super::ReportFormat::TableText));
    for path in &paths {
        println!("wrote {}", path.display());
    }
    Ok(())
}
