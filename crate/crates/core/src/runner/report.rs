//! Run outputs: the metrics report (three emission formats), stored
//! predictions, and the manifest that makes a run replayable.

use crate::agents::{CacheStats, PredictionRecord, PromptTemplate};
use crate::corpus::Label;
use crate::evaluation::{ConfusionMatrix, ErrorRecord, F1Averaging, Metrics, ReferenceDelta};
use crate::runner::config::ExperimentConfig;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};

/// Per-template results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub template_id: String,
    pub backend: String,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
    /// Bucket counts: parsed-only misses plus all unparsed responses.
    pub false_positives: usize,
    pub false_negatives: usize,
    pub unparsed: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceDelta>,
}

/// The whole run's scoreboard; rows sorted by template id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    pub f1_averaging: F1Averaging,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// Fixed-width table mirroring the published layout.
    TableText,
    /// Comma-delimited, full precision.
    Csv,
    /// One JSON record per row.
    Jsonl,
}

impl ReportFormat {
    pub fn all() -> [ReportFormat; 3] {
        [
            ReportFormat::TableText,
            ReportFormat::Csv,
            ReportFormat::Jsonl,
        ]
    }

    pub fn file_name(&self) -> &'static str {
        match self {
            ReportFormat::TableText => "report.txt",
            ReportFormat::Csv => "report.csv",
            ReportFormat::Jsonl => "report.jsonl",
        }
    }
}

/// Percentage rounded half-up to one decimal, e.g. 0.969 -> 96.9.
pub fn pct1(fraction: f64) -> f64 {
    (fraction * 1000.0).round() / 10.0
}

impl Report {
    pub fn new(mut rows: Vec<ReportRow>, f1_averaging: F1Averaging) -> Self {
        rows.sort_by(|a, b| a.template_id.cmp(&b.template_id));
        Report { rows, f1_averaging }
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::TableText => self.render_table(),
            ReportFormat::Csv => self.render_csv(),
            ReportFormat::Jsonl => self.render_jsonl(),
        }
    }

    fn render_table(&self) -> String {
        let mut out = format!(
            "{:<10}{:>8}{:>10}{:>10}\n",
            "Prompt", "F1, %", "Acc., %", "Unparsed"
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{:<10}{:>8.1}{:>10.1}{:>10}\n",
                row.template_id,
                pct1(row.metrics.f1(self.f1_averaging)),
                pct1(row.metrics.accuracy),
                row.unparsed,
            ));
        }
        out
    }

    fn render_csv(&self) -> String {
        let mut out = String::from(
            "template_id,backend,f1_pct,acc_pct,f1_macro,f1_weighted,accuracy,\
             match_precision,match_recall,match_f1,no_match_precision,no_match_recall,no_match_f1,\
             tp,fp,tn,fn,unparsed,false_positives,false_negatives,ref_setup,ref_f1_delta,ref_acc_delta\n",
        );
        for row in &self.rows {
            let m = &row.metrics;
            let cm = &row.confusion;
            let (ref_setup, ref_f1, ref_acc) = match &row.reference {
                Some(d) => (
                    d.setup.clone(),
                    format!("{:.1}", d.f1_delta_pct),
                    format!("{:.1}", d.acc_delta_pct),
                ),
                None => (String::new(), String::new(), String::new()),
            };
            out.push_str(&format!(
                "{},{},{:.1},{:.1},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.template_id,
                row.backend,
                pct1(m.f1(self.f1_averaging)),
                pct1(m.accuracy),
                m.f1_macro,
                m.f1_weighted,
                m.accuracy,
                m.match_class.precision,
                m.match_class.recall,
                m.match_class.f1,
                m.no_match_class.precision,
                m.no_match_class.recall,
                m.no_match_class.f1,
                cm.true_pos,
                cm.false_pos,
                cm.true_neg,
                cm.false_neg,
                row.unparsed,
                row.false_positives,
                row.false_negatives,
                ref_setup,
                ref_f1,
                ref_acc,
            ));
        }
        out
    }

    fn render_jsonl(&self) -> String {
        let mut out = String::new();
        for row in &self.rows {
            out.push_str(&serde_json::to_string(row).expect("report row serializes"));
            out.push('\n');
        }
        out
    }
}

/// Write one report file; returns its path.
pub fn emit_report(report: &Report, format: ReportFormat, dir: &Path) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format.file_name());
    std::fs::write(&path, report.render(format))?;
    Ok(path)
}

/// Write all three report formats; returns the paths.
pub fn emit_all_formats(report: &Report, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    ReportFormat::all()
        .iter()
        .map(|f| emit_report(report, *f, dir))
        .collect()
}

/// One few-shot pick as recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub id: String,
    pub label: Label,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Everything needed to re-run bit-identically against the cache.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub software_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// Config snapshot with every default already materialized.
    pub config: ExperimentConfig,
    pub few_shot: Vec<ShotRecord>,
    /// Full text of every template that was classified with.
    pub templates: Vec<PromptTemplate>,
    pub response_cache: CacheStats,
    pub embedding_cache: CacheStats,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, json)?;
        Ok(path)
    }
}

/// Stored predictions: one JSON record per line, full raw responses kept so
/// evaluation and error analysis never need to re-query a backend.
pub fn predictions_path(dir: &Path, backend: &str, template_id: &str) -> PathBuf {
    dir.join("predictions")
        .join(format!("{backend}__{template_id}.jsonl"))
}

pub fn write_predictions(
    dir: &Path,
    backend: &str,
    template_id: &str,
    records: &[PredictionRecord],
) -> std::io::Result<PathBuf> {
    let path = predictions_path(dir, backend, template_id);
    std::fs::create_dir_all(path.parent().unwrap())?;
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    for record in records {
        serde_json::to_writer(&mut file, record)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(path)
}

pub fn read_predictions(path: &Path) -> std::io::Result<Vec<PredictionRecord>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}

/// Error-bucket records, one JSONL file per template.
pub fn write_error_records(
    dir: &Path,
    template_id: &str,
    records: &[ErrorRecord],
) -> std::io::Result<PathBuf> {
    let path = dir.join("errors").join(format!("{template_id}.jsonl"));
    std::fs::create_dir_all(path.parent().unwrap())?;
    let mut out = String::new();
    for record in records {
        out.push_str(&serde_json::to_string(record).expect("error record serializes"));
        out.push('\n');
    }
    std::fs::write(&path, out)?;
    Ok(path)
}
