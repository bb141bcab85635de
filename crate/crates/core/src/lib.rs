//! Agent-based few-shot claim matching.
//!
//! The pipeline has two LLM agents: the first writes a task prompt from a
//! handful of labeled claim pairs, the second classifies claim pairs as
//! match / not-match under that prompt. Around them sit dataset ingest,
//! similarity-driven few-shot selection, a deterministic replay cache, and
//! an evaluation harness that scores runs and compares them against
//! published reference numbers.

pub mod agents;
pub mod corpus;
pub mod embeddings;
pub mod evaluation;
pub mod runner;
pub mod selection;

pub use corpus::{ClaimPair, Dataset, DatasetFormat, Label, Split};
pub use selection::{FewShotSet, SelectionSpec, SelectionStrategy};
