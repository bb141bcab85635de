//! End-to-end pipeline behavior with stub backends: report shape, stored
//! predictions, warm-cache replay, report rebuild.

mod common;

use claimmatch::agents::{ChatBackend, StubBackend, StubMode};
use claimmatch::runner::{ExperimentConfig, Pipeline, ReportFormat};
use common::{synthetic_dataset, write_stub_config};
use std::sync::Arc;

fn pipeline_with_counting_stub(config_path: &std::path::Path) -> (Pipeline, Arc<StubBackend>) {
    let config = ExperimentConfig::load(config_path).unwrap();
    let stub = Arc::new(StubBackend::new("stub-classifier", StubMode::HashLabel));
    let generator = config.generator.as_ref().map(|_| {
        Arc::new(StubBackend::new("stub-generator", StubMode::PromptSeries)) as Arc<dyn ChatBackend>
    });
    let pipeline = Pipeline {
        config,
        classifier: stub.clone(),
        generator,
    };
    (pipeline, stub)
}

#[tokio::test]
async fn run_produces_rows_predictions_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let test = synthetic_dataset(40, 1, "t");
    let pool = synthetic_dataset(60, 2, "p");
    let config_path = write_stub_config(
        dir.path(),
        &test,
        &pool,
        &["CM-t", "PD-t", "NLI-t"],
        4,
        &dir.path().join("cache"),
        &dir.path().join("out"),
        "",
    );
    let (pipeline, stub) = pipeline_with_counting_stub(&config_path);
    let outcome = pipeline.run().await.unwrap();

    assert_eq!(outcome.report.rows.len(), 3);
    let ids: Vec<&str> = outcome
        .report
        .rows
        .iter()
        .map(|r| r.template_id.as_str())
        .collect();
    assert_eq!(ids, ["CM-t", "NLI-t", "PD-t"], "rows sorted by template id");
    assert_eq!(stub.calls(), 120, "40 pairs x 3 templates");

    for row in &outcome.report.rows {
        assert_eq!(row.metrics.total, 40);
        assert_eq!(row.confusion.total(), 40);
    }

    // stored predictions exist, one file per (backend, template), dataset order
    for template in ["CM-t", "PD-t", "NLI-t"] {
        let path = dir
            .path()
            .join("out/predictions")
            .join(format!("stub-classifier__{template}.jsonl"));
        let records = claimmatch::runner::read_predictions(&path).unwrap();
        assert_eq!(records.len(), 40);
        let got: Vec<&str> = records.iter().map(|r| r.pair_id.as_str()).collect();
        let want: Vec<&str> = test.pairs().iter().map(|p| p.id.as_str()).collect();
        assert_eq!(got, want);
    }

    // manifest records the run
    assert_eq!(outcome.manifest.few_shot.len(), 10);
    assert_eq!(outcome.manifest.templates.len(), 3);
    assert_eq!(outcome.manifest.response_cache.misses, 120);
    assert_eq!(outcome.manifest.response_cache.hits, 0);
    assert!(
        outcome.manifest.embedding_cache.misses > 0,
        "sorted strategy embeds the pool"
    );
    let manifest_json = std::fs::read_to_string(&outcome.manifest_path).unwrap();
    assert!(manifest_json.contains("\"software_version\""));

    // report files exist in all three formats
    for format in ReportFormat::all() {
        let path = dir.path().join("out").join(format.file_name());
        assert!(path.exists(), "{path:?}");
    }
}

#[tokio::test]
async fn warm_cache_replays_without_backend_calls() {
    let dir = tempfile::tempdir().unwrap();
    let test = synthetic_dataset(30, 3, "t");
    let pool = synthetic_dataset(40, 4, "p");
    let cache = dir.path().join("cache");
    let out1 = dir.path().join("out1");
    let config_path = write_stub_config(dir.path(), &test, &pool, &["PD-t"], 2, &cache, &out1, "");

    let (pipeline, stub) = pipeline_with_counting_stub(&config_path);
    let first = pipeline.run().await.unwrap();
    assert_eq!(stub.calls(), 30);
    assert_eq!(first.manifest.response_cache.misses, 30);

    // second pipeline, same cache, fresh output dir
    let (mut pipeline2, stub2) = pipeline_with_counting_stub(&config_path);
    pipeline2.config.run.output_dir = dir.path().join("out2");
    let second = pipeline2.run().await.unwrap();
    assert_eq!(stub2.calls(), 0, "warm cache answers everything");
    assert_eq!(second.manifest.response_cache.hits, 30);
    assert_eq!(second.manifest.response_cache.misses, 0);

    for format in ReportFormat::all() {
        let a = std::fs::read(out1.join(format.file_name())).unwrap();
        let b = std::fs::read(dir.path().join("out2").join(format.file_name())).unwrap();
        assert_eq!(
            a,
            b,
            "{} must be byte-identical on replay",
            format.file_name()
        );
    }

    // cached flag flips, parsed labels identical
    let p1 =
        claimmatch::runner::read_predictions(&out1.join("predictions/stub-classifier__PD-t.jsonl"))
            .unwrap();
    let p2 = claimmatch::runner::read_predictions(
        &dir.path()
            .join("out2")
            .join("predictions/stub-classifier__PD-t.jsonl"),
    )
    .unwrap();
    assert!(p1.iter().all(|r| !r.cached));
    assert!(p2.iter().all(|r| r.cached));
    let labels = |rs: &[claimmatch::agents::PredictionRecord]| {
        rs.iter()
            .map(|r| (r.pair_id.clone(), r.parsed))
            .collect::<Vec<_>>()
    };
    assert_eq!(labels(&p1), labels(&p2));
}

#[tokio::test]
async fn generated_templates_flow_through_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let test = synthetic_dataset(20, 5, "t");
    let pool = synthetic_dataset(40, 6, "p");
    let extra = r#"
[generator]
n_attempts = 3

[generator.backend]
name = "stub-generator"
endpoint = "stub://prompts"
model_id = "stub-gen"
"#;
    let config_path = write_stub_config(
        dir.path(),
        &test,
        &pool,
        &["CM-t", "generated"],
        2,
        &dir.path().join("cache"),
        &dir.path().join("out"),
        extra,
    );
    let (pipeline, _stub) = pipeline_with_counting_stub(&config_path);
    let outcome = pipeline.run().await.unwrap();

    // CM-t + three distinct generated prompts
    assert_eq!(outcome.report.rows.len(), 4);
    let ids: Vec<&str> = outcome
        .report
        .rows
        .iter()
        .map(|r| r.template_id.as_str())
        .collect();
    assert_eq!(ids, ["CM-t", "G1", "G2", "G3"]);
    let generated: Vec<_> = outcome
        .manifest
        .templates
        .iter()
        .filter(|t| t.raw_response.is_some())
        .collect();
    assert_eq!(generated.len(), 3);
}

#[tokio::test]
async fn report_rebuild_from_disk_matches_the_original() {
    let dir = tempfile::tempdir().unwrap();
    let test = synthetic_dataset(24, 7, "t");
    let pool = synthetic_dataset(30, 8, "p");
    let config_path = write_stub_config(
        dir.path(),
        &test,
        &pool,
        &["CM-t", "NLI-t"],
        2,
        &dir.path().join("cache"),
        &dir.path().join("out"),
        "",
    );
    let (pipeline, _stub) = pipeline_with_counting_stub(&config_path);
    let outcome = pipeline.run().await.unwrap();
    let rebuilt = pipeline.rebuild_report_from_disk().unwrap();
    assert_eq!(outcome.report, rebuilt);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_runs_share_a_cache_safely() {
    let dir = tempfile::tempdir().unwrap();
    let test = synthetic_dataset(60, 11, "t");
    let pool = synthetic_dataset(40, 12, "p");
    let cache = dir.path().join("cache");
    let config_path = write_stub_config(
        dir.path(),
        &test,
        &pool,
        &["CM-t", "PD-t"],
        8,
        &cache,
        &dir.path().join("out_a"),
        "",
    );
    let (pipeline_a, _stub_a) = pipeline_with_counting_stub(&config_path);
    let (mut pipeline_b, _stub_b) = pipeline_with_counting_stub(&config_path);
    pipeline_b.config.run.output_dir = dir.path().join("out_b");

    // both runs race on the same response cache; identical keys carry
    // identical values, so whoever writes last changes nothing
    let (a, b) = tokio::join!(pipeline_a.run(), pipeline_b.run());
    let a = a.unwrap();
    let b = b.unwrap();
    assert_eq!(a.report, b.report);
    for format in ReportFormat::all() {
        let ra = std::fs::read(dir.path().join("out_a").join(format.file_name())).unwrap();
        let rb = std::fs::read(dir.path().join("out_b").join(format.file_name())).unwrap();
        assert_eq!(ra, rb);
    }

    // a third run over the now-warm cache answers fully from disk
    let (mut pipeline_c, stub_c) = pipeline_with_counting_stub(&config_path);
    pipeline_c.config.run.output_dir = dir.path().join("out_c");
    let c = pipeline_c.run().await.unwrap();
    assert_eq!(stub_c.calls(), 0);
    assert_eq!(c.report, a.report);
}

#[tokio::test]
async fn overlapping_test_and_pool_ids_fail_at_corpus_stage() {
    let dir = tempfile::tempdir().unwrap();
    let test = synthetic_dataset(10, 9, "x");
    let pool = synthetic_dataset(20, 10, "x"); // same prefix + seeds overlap ids
    let config_path = write_stub_config(
        dir.path(),
        &test,
        &pool,
        &["CM-t"],
        1,
        &dir.path().join("cache"),
        &dir.path().join("out"),
        "",
    );
    let (pipeline, _stub) = pipeline_with_counting_stub(&config_path);
    let msg = match pipeline.run().await {
        Ok(_) => panic!("expected an overlap error"),
        Err(e) => e.to_string(),
    };
    assert!(msg.starts_with("[corpus]"), "stage-tagged: {msg}");
}
