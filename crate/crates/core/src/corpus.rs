//! Claim-pair datasets: loading, validation, and test/pool partitioning.
//!
//! Two on-disk formats are supported: a tab-separated file with a header
//! (`id`, `claim_a`, `claim_b`, `label`) and a JSON-lines file with the same
//! fields. Ingest is tolerant about label spellings; the in-memory model is
//! strict.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;

/// Binary gold label for a claim pair. `Match` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "match")]
    Match,
    #[serde(rename = "not_match")]
    NoMatch,
}

impl Label {
    /// Canonical serialized form: `"match"` / `"not_match"`.
    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Match => "match",
            Label::NoMatch => "not_match",
        }
    }

    /// Parse an ingest spelling. Accepted (case-insensitively, trimmed):
    /// `match`/`yes`/`1` and `not_match`/`no`/`0`.
    pub fn parse_lenient(s: &str) -> Option<Label> {
        match s.trim().to_lowercase().as_str() {
            "match" | "yes" | "1" => Some(Label::Match),
            "not_match" | "no" | "0" => Some(Label::NoMatch),
            _ => None,
        }
    }

    pub fn opposite(&self) -> Label {
        match self {
            Label::Match => Label::NoMatch,
            Label::NoMatch => Label::Match,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Two claims and (optionally) their gold label. The unit of classification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimPair {
    pub id: String,
    pub claim_a: String,
    pub claim_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold: Option<Label>,
}

/// Which role a dataset plays in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    TestSet,
    SelectionPool,
    Unsplit,
}

/// An ordered, duplicate-free collection of claim pairs.
///
/// Read-only after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pairs: Vec<ClaimPair>,
    split: Split,
}

/// On-disk dataset format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// Tab-separated values with a header row.
    Tsv,
    /// One JSON object per line.
    Jsonl,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("dataset file not found or unreadable: {0}")]
    MissingFile(String),
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("duplicate pair id: {0}")]
    DuplicateId(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("pairs without gold labels: {}", ids.join(", "))]
    UnlabeledPairs { ids: Vec<String> },
    #[error("field of pair {id} contains a tab or line break; not representable as tsv")]
    UnwritableField { id: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Per-class counts produced by [`validate_balance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceSummary {
    pub match_count: usize,
    pub no_match_count: usize,
    pub balanced: bool,
}

impl Dataset {
    /// Build a dataset, enforcing unique ids and non-empty claim texts.
    pub fn new(pairs: Vec<ClaimPair>, split: Split) -> Result<Self, CorpusError> {
        if pairs.is_empty() {
            return Err(CorpusError::EmptyDataset);
        }
        let mut seen = HashSet::with_capacity(pairs.len());
        for (i, p) in pairs.iter().enumerate() {
            if p.claim_a.trim().is_empty() || p.claim_b.trim().is_empty() {
                return Err(CorpusError::MalformedRow {
                    row: i + 1,
                    reason: format!("pair {} has an empty claim", p.id),
                });
            }
            if !seen.insert(p.id.clone()) {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        Ok(Dataset { pairs, split })
    }

    pub fn pairs(&self) -> &[ClaimPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn get(&self, id: &str) -> Option<&ClaimPair> {
        self.pairs.iter().find(|p| p.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.id.as_str())
    }

    /// Ids present in both datasets. Empty means the splits are disjoint.
    pub fn overlapping_ids(&self, other: &Dataset) -> Vec<String> {
        let mine: HashSet<&str> = self.ids().collect();
        other
            .ids()
            .filter(|id| mine.contains(id))
            .map(|id| id.to_string())
            .collect()
    }
}

const SYNTH_ID_WIDTH: usize = 6;

fn synth_id(index: usize) -> String {
    format!("{:0width$}", index, width = SYNTH_ID_WIDTH)
}

/// Load a dataset from disk. Row order is preserved; missing ids are
/// synthesized as zero-padded row indices.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset, CorpusError> {
    let text = std::fs::read_to_string(path)
        .map_err(|_| CorpusError::MissingFile(path.display().to_string()))?;
    match format {
        DatasetFormat::Tsv => parse_tsv(&text),
        DatasetFormat::Jsonl => parse_jsonl(&text),
    }
}

/// Serialize a dataset to disk in the given format.
///
/// TSV refuses fields containing tabs or line breaks so that
/// load -> save -> load is byte-stable; JSONL accepts any text.
pub fn save_dataset(d: &Dataset, path: &Path, format: DatasetFormat) -> Result<(), CorpusError> {
    let bytes = match format {
        DatasetFormat::Tsv => to_tsv(d)?,
        DatasetFormat::Jsonl => to_jsonl(d),
    };
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Count gold labels per class. Errors if any pair is unlabeled.
pub fn validate_balance(d: &Dataset) -> Result<BalanceSummary, CorpusError> {
    let unlabeled: Vec<String> = d
        .pairs()
        .iter()
        .filter(|p| p.gold.is_none())
        .map(|p| p.id.clone())
        .collect();
    if !unlabeled.is_empty() {
        return Err(CorpusError::UnlabeledPairs { ids: unlabeled });
    }
    let match_count = d
        .pairs()
        .iter()
        .filter(|p| p.gold == Some(Label::Match))
        .count();
    let no_match_count = d.len() - match_count;
    Ok(BalanceSummary {
        match_count,
        no_match_count,
        balanced: match_count == no_match_count,
    })
}

fn parse_tsv(text: &str) -> Result<Dataset, CorpusError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(CorpusError::EmptyDataset)?;
    let cols: Vec<&str> = header.split('\t').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let id_col = find("id");
    let a_col = find("claim_a").ok_or(CorpusError::MalformedRow {
        row: 1,
        reason: "header is missing the claim_a column".into(),
    })?;
    let b_col = find("claim_b").ok_or(CorpusError::MalformedRow {
        row: 1,
        reason: "header is missing the claim_b column".into(),
    })?;
    let label_col = find("label");

    let mut pairs = Vec::new();
    for (lineno, line) in lines {
        let row = lineno + 1; // 1-based file line number
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != cols.len() {
            return Err(CorpusError::MalformedRow {
                row,
                reason: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        let claim_a = fields[a_col].to_string();
        let claim_b = fields[b_col].to_string();
        if claim_a.trim().is_empty() || claim_b.trim().is_empty() {
            return Err(CorpusError::MalformedRow {
                row,
                reason: "empty claim text".into(),
            });
        }
        let id = match id_col {
            Some(c) if !fields[c].trim().is_empty() => fields[c].trim().to_string(),
            Some(_) => {
                return Err(CorpusError::MalformedRow {
                    row,
                    reason: "empty id field".into(),
                })
            }
            None => synth_id(pairs.len()),
        };
        let gold =
            match label_col {
                Some(c) if fields[c].trim().is_empty() => None,
                Some(c) => Some(Label::parse_lenient(fields[c]).ok_or_else(|| {
                    CorpusError::MalformedRow {
                        row,
                        reason: format!("unrecognized label {:?}", fields[c]),
                    }
                })?),
                None => None,
            };
        pairs.push(ClaimPair {
            id,
            claim_a,
            claim_b,
            gold,
        });
    }
    Dataset::new(pairs, Split::Unsplit)
}

#[derive(Serialize, Deserialize)]
struct JsonRow<'a> {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    claim_a: std::borrow::Cow<'a, str>,
    claim_b: std::borrow::Cow<'a, str>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

fn parse_jsonl(text: &str) -> Result<Dataset, CorpusError> {
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let row = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonRow = serde_json::from_str(line).map_err(|e| CorpusError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        if raw.claim_a.trim().is_empty() || raw.claim_b.trim().is_empty() {
            return Err(CorpusError::MalformedRow {
                row,
                reason: "empty claim text".into(),
            });
        }
        let gold = match raw.label {
            None => None,
            Some(ref l) => {
                Some(
                    Label::parse_lenient(l).ok_or_else(|| CorpusError::MalformedRow {
                        row,
                        reason: format!("unrecognized label {:?}", l),
                    })?,
                )
            }
        };
        pairs.push(ClaimPair {
            id: raw.id.unwrap_or_else(|| synth_id(pairs.len())),
            claim_a: raw.claim_a.into_owned(),
            claim_b: raw.claim_b.into_owned(),
            gold,
        });
    }
    Dataset::new(pairs, Split::Unsplit)
}

fn to_tsv(d: &Dataset) -> Result<String, CorpusError> {
    let mut out = String::from("id\tclaim_a\tclaim_b\tlabel\n");
    for p in d.pairs() {
        for field in [&p.id, &p.claim_a, &p.claim_b] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(CorpusError::UnwritableField { id: p.id.clone() });
            }
        }
        out.push_str(&p.id);
        out.push('\t');
        out.push_str(&p.claim_a);
        out.push('\t');
        out.push_str(&p.claim_b);
        out.push('\t');
        out.push_str(p.gold.map(|l| l.as_str()).unwrap_or(""));
        out.push('\n');
    }
    Ok(out)
}

fn to_jsonl(d: &Dataset) -> String {
    let mut out = String::new();
    for p in d.pairs() {
        let row = JsonRow {
            id: Some(p.id.clone()),
            claim_a: p.claim_a.as_str().into(),
            claim_b: p.claim_b.as_str().into(),
            label: p.gold.map(|l| l.as_str().to_string()),
        };
        out.push_str(&serde_json::to_string(&row).expect("row serialization cannot fail"));
        out.push('\n');
    }
    out
}
