//! Scoring: confusion matrix, accuracy and F1, error buckets, and deltas
//! against the published reference numbers.
//!
//! `Match` is the positive class throughout. An unparseable response counts
//! as a predicted not-match in the matrix (keeping denominators at the full
//! test size) and is tallied separately in `unparsed`.

use crate::agents::{ParsedLabel, PredictionRecord};
use crate::corpus::{Dataset, Label};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::OnceLock;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("prediction references unknown pair id {0}")]
    UnknownPairId(String),
    #[error("pair {0} has no gold label")]
    MissingGold(String),
    #[error("cannot compute metrics over zero predictions")]
    EmptyInput,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
    /// Predictions with no parseable label; already folded into the counts
    /// above as predicted not-match.
    pub unparsed: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }
}

/// Precision/recall/F1 for one class, with the 0/0 := 0 convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub match_class: ClassMetrics,
    pub no_match_class: ClassMetrics,
    pub unparsed_count: usize,
    pub total: usize,
}

/// Which single F1 number a report shows and compares.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum F1Averaging {
    #[default]
    Macro,
    Weighted,
}

impl Metrics {
    pub fn f1(&self, averaging: F1Averaging) -> f64 {
        match averaging {
            F1Averaging::Macro => self.f1_macro,
            F1Averaging::Weighted => self.f1_weighted,
        }
    }
}

fn gold_for(preds: &[PredictionRecord], gold: &Dataset) -> Result<Vec<(usize, Label)>, EvalError> {
    let by_id: HashMap<&str, &crate::corpus::ClaimPair> =
        gold.pairs().iter().map(|p| (p.id.as_str(), p)).collect();
    preds
        .iter()
        .enumerate()
        .map(|(i, pred)| {
            let pair = by_id
                .get(pred.pair_id.as_str())
                .ok_or_else(|| EvalError::UnknownPairId(pred.pair_id.clone()))?;
            let label = pair
                .gold
                .ok_or_else(|| EvalError::MissingGold(pred.pair_id.clone()))?;
            Ok((i, label))
        })
        .collect()
}

/// Tally predictions against gold labels.
pub fn confusion(preds: &[PredictionRecord], gold: &Dataset) -> Result<ConfusionMatrix, EvalError> {
    let mut cm = ConfusionMatrix::default();
    for (i, gold_label) in gold_for(preds, gold)? {
        let predicted = match preds[i].parsed {
            ParsedLabel::Match => Label::Match,
            ParsedLabel::NoMatch => Label::NoMatch,
            ParsedLabel::Unparsed => {
                cm.unparsed += 1;
                Label::NoMatch
            }
        };
        match (gold_label, predicted) {
            (Label::Match, Label::Match) => cm.true_pos += 1,
            (Label::Match, Label::NoMatch) => cm.false_neg += 1,
            (Label::NoMatch, Label::Match) => cm.false_pos += 1,
            (Label::NoMatch, Label::NoMatch) => cm.true_neg += 1,
        }
    }
    Ok(cm)
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Accuracy, per-class precision/recall/F1, and macro / support-weighted F1.
pub fn compute_metrics(cm: &ConfusionMatrix) -> Result<Metrics, EvalError> {
    let total = cm.total();
    if total == 0 {
        return Err(EvalError::EmptyInput);
    }
    let match_class = {
        let precision = ratio(cm.true_pos, cm.true_pos + cm.false_pos);
        let recall = ratio(cm.true_pos, cm.true_pos + cm.false_neg);
        ClassMetrics {
            precision,
            recall,
            f1: f1(precision, recall),
            support: cm.true_pos + cm.false_neg,
        }
    };
    let no_match_class = {
        let precision = ratio(cm.true_neg, cm.true_neg + cm.false_neg);
        let recall = ratio(cm.true_neg, cm.true_neg + cm.false_pos);
        ClassMetrics {
            precision,
            recall,
            f1: f1(precision, recall),
            support: cm.true_neg + cm.false_pos,
        }
    };
    Ok(Metrics {
        accuracy: ratio(cm.true_pos + cm.true_neg, total),
        f1_macro: (match_class.f1 + no_match_class.f1) / 2.0,
        f1_weighted: (match_class.f1 * match_class.support as f64
            + no_match_class.f1 * no_match_class.support as f64)
            / total as f64,
        match_class,
        no_match_class,
        unparsed_count: cm.unparsed,
        total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    FalsePositive,
    FalseNegative,
    Unparsed,
}

/// One misclassified or unparseable pair, with a response excerpt for
/// error analysis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub pair_id: String,
    pub kind: ErrorKind,
    pub excerpt: String,
}

const EXCERPT_CHARS: usize = 300;

/// One record per miss: false positives, false negatives, and unparsed
/// responses (whatever the gold label).
pub fn error_buckets(
    preds: &[PredictionRecord],
    gold: &Dataset,
) -> Result<Vec<ErrorRecord>, EvalError> {
    let mut records = Vec::new();
    for (i, gold_label) in gold_for(preds, gold)? {
        let pred = &preds[i];
        let kind = match (gold_label, pred.parsed) {
            (_, ParsedLabel::Unparsed) => ErrorKind::Unparsed,
            (Label::NoMatch, ParsedLabel::Match) => ErrorKind::FalsePositive,
            (Label::Match, ParsedLabel::NoMatch) => ErrorKind::FalseNegative,
            _ => continue,
        };
        records.push(ErrorRecord {
            pair_id: pred.pair_id.clone(),
            kind,
            excerpt: pred.raw_response.chars().take(EXCERPT_CHARS).collect(),
        });
    }
    Ok(records)
}

/// One row of the published results tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    pub group: String,
    pub setup: String,
    pub f1_pct: f64,
    pub acc_pct: f64,
}

static REFERENCE_ROWS: OnceLock<Vec<ReferenceRow>> = OnceLock::new();

/// Published reference numbers, shipped as a data file.
pub fn reference_rows() -> &'static [ReferenceRow] {
    REFERENCE_ROWS.get_or_init(|| {
        serde_json::from_str(include_str!("../data/reference_rows.json"))
            .expect("bundled reference table must parse")
    })
}

/// Look up a reference row by its setup label, e.g. `"Mistral + L4"`.
pub fn find_reference(setup: &str) -> Option<&'static ReferenceRow> {
    reference_rows().iter().find(|r| r.setup == setup)
}

/// Artifact-minus-reference gap, in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDelta {
    pub setup: String,
    pub f1_delta_pct: f64,
    pub acc_delta_pct: f64,
    pub tolerance_pct: f64,
    pub within_tolerance: bool,
}

pub fn compare_to_reference(
    metrics: &Metrics,
    averaging: F1Averaging,
    row: &ReferenceRow,
    tolerance_pct: f64,
) -> ReferenceDelta {
    let f1_delta_pct = metrics.f1(averaging) * 100.0 - row.f1_pct;
    let acc_delta_pct = metrics.accuracy * 100.0 - row.acc_pct;
    ReferenceDelta {
        setup: row.setup.clone(),
        f1_delta_pct,
        acc_delta_pct,
        tolerance_pct,
        within_tolerance: f1_delta_pct.abs() <= tolerance_pct
            && acc_delta_pct.abs() <= tolerance_pct,
    }
}
