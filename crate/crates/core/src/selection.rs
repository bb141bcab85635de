//! Few-shot example selection: manual, random, similarity-sorted, borderline.
//!
//! All strategies return a class-balanced set of k examples drawn from the
//! selection pool. Ties are always broken by ascending pair id so that runs
//! reproduce across platforms.

use crate::corpus::{ClaimPair, Dataset, Label};
use crate::embeddings::ScoredPair;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// How few-shot examples are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// Explicit ids from the experiment config.
    Manual,
    /// Seeded uniform sampling without replacement, per class.
    Random,
    /// Highest-similarity positives, lowest-similarity negatives.
    Sorted,
    /// Per class: two highest, two lowest, one closest to the class mean.
    Borderline,
}

pub const DEFAULT_SHOT_COUNT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSpec {
    pub strategy: SelectionStrategy,
    /// Number of examples; even, split k/2 per class.
    #[serde(default = "default_k")]
    pub k: usize,
    /// RNG seed for the random strategy.
    #[serde(default)]
    pub seed: u64,
    /// Ids for the manual strategy, in prompt order.
    #[serde(default)]
    pub manual_ids: Vec<String>,
}

fn default_k() -> usize {
    DEFAULT_SHOT_COUNT
}

impl SelectionSpec {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.k == 0 || !self.k.is_multiple_of(2) {
            return Err(SelectionError::InvalidSpec(format!(
                "k must be a positive even integer, got {}",
                self.k
            )));
        }
        if self.strategy == SelectionStrategy::Manual && self.manual_ids.len() != self.k {
            return Err(SelectionError::InvalidSpec(format!(
                "manual strategy needs exactly k={} ids, got {}",
                self.k,
                self.manual_ids.len()
            )));
        }
        if self.strategy == SelectionStrategy::Borderline && self.k != 10 {
            return Err(SelectionError::InvalidSpec(
                "borderline strategy picks 2 high + 2 low + 1 mean per class, so k must be 10"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// One selected example; the label duplicates the pair's gold for convenience.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotExample {
    pub pair: ClaimPair,
    pub label: Label,
    /// Similarity score, when the strategy used one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// A validated balanced few-shot set: k examples, k/2 per class, unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FewShotSet {
    examples: Vec<ShotExample>,
    spec: SelectionSpec,
}

#[derive(Debug, thiserror::Error)]
pub enum SelectionError {
    #[error("invalid selection spec: {0}")]
    InvalidSpec(String),
    #[error("id not present in the selection pool: {0}")]
    UnknownId(String),
    #[error("pair {0} has no gold label")]
    UnlabeledPair(String),
    #[error("manual ids are class-imbalanced: {match_count} match vs {no_match_count} not_match")]
    ClassImbalance {
        match_count: usize,
        no_match_count: usize,
    },
    #[error("pool has {have} {label} pairs, need {need}")]
    InsufficientClass {
        label: Label,
        have: usize,
        need: usize,
    },
    #[error("no similarity score for pool pair {0}")]
    MissingScore(String),
}

impl FewShotSet {
    fn build(examples: Vec<ShotExample>, spec: SelectionSpec) -> Result<Self, SelectionError> {
        debug_assert_eq!(examples.len(), spec.k);
        let match_count = examples.iter().filter(|e| e.label == Label::Match).count();
        debug_assert_eq!(match_count, spec.k / 2);
        let mut ids: Vec<&str> = examples.iter().map(|e| e.pair.id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        debug_assert_eq!(ids.len(), examples.len());
        let _ = match_count;
        Ok(FewShotSet { examples, spec })
    }

    pub fn examples(&self) -> &[ShotExample] {
        &self.examples
    }

    pub fn spec(&self) -> &SelectionSpec {
        &self.spec
    }

    pub fn k(&self) -> usize {
        self.examples.len()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.examples.iter().map(|e| e.pair.id.as_str())
    }
}

fn labeled(pool: &Dataset, label: Label) -> Vec<&ClaimPair> {
    pool.pairs()
        .iter()
        .filter(|p| p.gold == Some(label))
        .collect()
}

fn require_class(
    pool: &Dataset,
    label: Label,
    need: usize,
) -> Result<Vec<&ClaimPair>, SelectionError> {
    let members = labeled(pool, label);
    if members.len() < need {
        return Err(SelectionError::InsufficientClass {
            label,
            have: members.len(),
            need,
        });
    }
    Ok(members)
}

/// Hand-picked examples, in the order given by `spec.manual_ids`.
pub fn select_manual(pool: &Dataset, spec: &SelectionSpec) -> Result<FewShotSet, SelectionError> {
    spec.validate()?;
    let mut examples = Vec::with_capacity(spec.k);
    for id in &spec.manual_ids {
        let pair = pool
            .get(id)
            .ok_or_else(|| SelectionError::UnknownId(id.clone()))?;
        let label = pair
            .gold
            .ok_or_else(|| SelectionError::UnlabeledPair(id.clone()))?;
        examples.push(ShotExample {
            pair: pair.clone(),
            label,
            score: None,
        });
    }
    let match_count = examples.iter().filter(|e| e.label == Label::Match).count();
    if match_count != spec.k / 2 {
        return Err(SelectionError::ClassImbalance {
            match_count,
            no_match_count: spec.k - match_count,
        });
    }
    FewShotSet::build(examples, spec.clone())
}

/// Seeded uniform sampling without replacement inside each class;
/// positives first, each sub-list in sampled order.
pub fn select_random(pool: &Dataset, spec: &SelectionSpec) -> Result<FewShotSet, SelectionError> {
    spec.validate()?;
    let per_class = spec.k / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut examples = Vec::with_capacity(spec.k);
    for label in [Label::Match, Label::NoMatch] {
        let mut members = require_class(pool, label, per_class)?;
        // partial Fisher-Yates: the first per_class slots are the sample,
        // in drawn order
        for i in 0..per_class {
            let j = rng.gen_range(i..members.len());
            members.swap(i, j);
            examples.push(ShotExample {
                pair: members[i].clone(),
                label,
                score: None,
            });
        }
    }
    FewShotSet::build(examples, spec.clone())
}

fn score_map(scores: &[ScoredPair]) -> HashMap<&str, f64> {
    scores
        .iter()
        .map(|s| (s.pair_id.as_str(), s.score))
        .collect()
}

fn attach_scores<'a>(
    members: Vec<&'a ClaimPair>,
    scores: &HashMap<&str, f64>,
) -> Result<Vec<(&'a ClaimPair, f64)>, SelectionError> {
    members
        .into_iter()
        .map(|p| {
            scores
                .get(p.id.as_str())
                .map(|s| (p, *s))
                .ok_or_else(|| SelectionError::MissingScore(p.id.clone()))
        })
        .collect()
}

fn by_score_desc(a: &(&ClaimPair, f64), b: &(&ClaimPair, f64)) -> std::cmp::Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.id.cmp(&b.0.id))
}

fn by_score_asc(a: &(&ClaimPair, f64), b: &(&ClaimPair, f64)) -> std::cmp::Ordering {
    a.1.total_cmp(&b.1).then_with(|| a.0.id.cmp(&b.0.id))
}

/// Top-scored positives and bottom-scored negatives.
///
/// Output order: positives by descending score, then negatives by ascending
/// score; equal scores fall back to ascending id.
pub fn select_sorted(
    pool: &Dataset,
    scores: &[ScoredPair],
    spec: &SelectionSpec,
) -> Result<FewShotSet, SelectionError> {
    spec.validate()?;
    let per_class = spec.k / 2;
    let map = score_map(scores);
    let mut examples = Vec::with_capacity(spec.k);

    let mut positives = attach_scores(require_class(pool, Label::Match, per_class)?, &map)?;
    positives.sort_unstable_by(by_score_desc);
    for (pair, score) in positives.into_iter().take(per_class) {
        examples.push(ShotExample {
            pair: pair.clone(),
            label: Label::Match,
            score: Some(score),
        });
    }

    let mut negatives = attach_scores(require_class(pool, Label::NoMatch, per_class)?, &map)?;
    negatives.sort_unstable_by(by_score_asc);
    for (pair, score) in negatives.into_iter().take(per_class) {
        examples.push(ShotExample {
            pair: pair.clone(),
            label: Label::NoMatch,
            score: Some(score),
        });
    }

    FewShotSet::build(examples, spec.clone())
}

/// Per class: the two highest-scored, the two lowest-scored, and the one
/// remaining pair closest to the class mean score. Match class first.
///
/// The picks are removed sequentially (high pair, then low pair, then mean),
/// which keeps them disjoint even when scores tie across the extremes.
pub fn select_borderline(
    pool: &Dataset,
    scores: &[ScoredPair],
    spec: &SelectionSpec,
) -> Result<FewShotSet, SelectionError> {
    spec.validate()?;
    let map = score_map(scores);
    let mut examples = Vec::with_capacity(spec.k);
    for label in [Label::Match, Label::NoMatch] {
        let members = attach_scores(require_class(pool, label, 5)?, &map)?;
        let mean = members.iter().map(|(_, s)| s).sum::<f64>() / members.len() as f64;

        let mut remaining = members;
        let mut class_pick = Vec::with_capacity(5);
        for _ in 0..2 {
            remaining.sort_unstable_by(by_score_desc);
            class_pick.push(remaining.remove(0));
        }
        let mut lows = Vec::with_capacity(2);
        for _ in 0..2 {
            remaining.sort_unstable_by(by_score_asc);
            lows.push(remaining.remove(0));
        }
        remaining.sort_unstable_by(|a, b| {
            (a.1 - mean)
                .abs()
                .total_cmp(&(b.1 - mean).abs())
                .then_with(|| a.0.id.cmp(&b.0.id))
        });
        let mean_pick = remaining.remove(0);

        // output order inside the class: highs desc, lows asc, then the mean pick
        class_pick.extend(lows);
        class_pick.push(mean_pick);
        for (pair, score) in class_pick {
            examples.push(ShotExample {
                pair: pair.clone(),
                label,
                score: Some(score),
            });
        }
    }
    FewShotSet::build(examples, spec.clone())
}

/// Dispatch on the spec's strategy.
pub fn select(
    pool: &Dataset,
    scores: Option<&[ScoredPair]>,
    spec: &SelectionSpec,
) -> Result<FewShotSet, SelectionError> {
    match spec.strategy {
        SelectionStrategy::Manual => select_manual(pool, spec),
        SelectionStrategy::Random => select_random(pool, spec),
        SelectionStrategy::Sorted => {
            let scores = scores.ok_or_else(|| {
                SelectionError::InvalidSpec("sorted strategy needs similarity scores".into())
            })?;
            select_sorted(pool, scores, spec)
        }
        SelectionStrategy::Borderline => {
            let scores = scores.ok_or_else(|| {
                SelectionError::InvalidSpec("borderline strategy needs similarity scores".into())
            })?;
            select_borderline(pool, scores, spec)
        }
    }
}
