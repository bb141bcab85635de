//! Shared fixtures for integration tests: synthetic datasets and configs.

use claimmatch::corpus::{save_dataset, ClaimPair, Dataset, DatasetFormat, Label, Split};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::Path;

const SUBJECTS: &[&str] = &[
    "the city council",
    "a regional court",
    "the health agency",
    "a major airline",
    "the film studio",
    "a research team",
    "the rail operator",
    "the football club",
    "a tech company",
    "the national bank",
];

const EVENTS: &[&str] = &[
    "approved the new budget",
    "recalled a faulty product",
    "postponed the annual event",
    "opened a second facility",
    "reported record attendance",
    "suspended its main service",
    "announced a merger plan",
    "published updated figures",
    "launched an inquiry",
    "settled the long dispute",
];

const REPHRASED: &[&str] = &[
    "gave the new budget its approval",
    "pulled a defective product from shelves",
    "pushed the annual event to a later date",
    "inaugurated a second facility",
    "said attendance broke records",
    "halted its main service",
    "unveiled plans to merge",
    "released revised figures",
    "started an investigation",
    "resolved the long-running dispute",
];

/// Balanced synthetic dataset: matching pairs are paraphrases, non-matching
/// pairs combine unrelated subject/event draws. Deterministic in the seed.
pub fn synthetic_dataset(n_pairs: usize, seed: u64, id_prefix: &str) -> Dataset {
    assert!(n_pairs.is_multiple_of(2), "want a balanced set");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    for i in 0..n_pairs / 2 {
        let s = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
        let e = rng.gen_range(0..EVENTS.len());
        pairs.push(ClaimPair {
            id: format!("{id_prefix}m{i:05}"),
            claim_a: format!("{s} {} on day {i}", EVENTS[e]),
            claim_b: format!("{s} {} on day {i}", REPHRASED[e]),
            gold: Some(Label::Match),
        });
        let s2 = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
        let e2 = rng.gen_range(0..EVENTS.len());
        let e3 = (e2 + 1 + rng.gen_range(0..EVENTS.len() - 1)) % EVENTS.len();
        pairs.push(ClaimPair {
            id: format!("{id_prefix}n{i:05}"),
            claim_a: format!("{s2} {} on day {i}", EVENTS[e2]),
            claim_b: format!(
                "{} {} on day {}",
                SUBJECTS[(i + 3) % SUBJECTS.len()],
                EVENTS[e3],
                i + 7
            ),
            gold: Some(Label::NoMatch),
        });
    }
    Dataset::new(pairs, Split::Unsplit).unwrap()
}

/// Write test/pool datasets plus a stub-backed config into `dir`; returns the
/// config path. `extra` is appended verbatim (e.g. a [generator] section).
#[allow(dead_code, clippy::too_many_arguments)] // not every test binary uses every helper
pub fn write_stub_config(
    dir: &Path,
    test: &Dataset,
    pool: &Dataset,
    template_ids: &[&str],
    parallelism: usize,
    cache_dir: &Path,
    output_dir: &Path,
    extra: &str,
) -> std::path::PathBuf {
    save_dataset(test, &dir.join("test.tsv"), DatasetFormat::Tsv).unwrap();
    save_dataset(pool, &dir.join("pool.tsv"), DatasetFormat::Tsv).unwrap();
    let templates = template_ids
        .iter()
        .map(|t| format!("\"{t}\""))
        .collect::<Vec<_>>()
        .join(", ");
    let config = format!(
        r#"
[datasets]
test = "test.tsv"
pool = "pool.tsv"
format = "tsv"

[selection]
strategy = "sorted"
k = 10

[classifier.backend]
name = "stub-classifier"
endpoint = "stub://hash"
model_id = "stub-model"

[run]
template_ids = [{templates}]
parallelism = {parallelism}
cache_dir = {cache:?}
output_dir = {output:?}
{extra}
"#,
        cache = cache_dir.display().to_string(),
        output = output_dir.display().to_string(),
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}
