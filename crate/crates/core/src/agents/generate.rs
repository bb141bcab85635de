//! The prompt-generation agent and near-duplicate merging.

use super::render::build_generation_request;
use super::templates::{AnswerFormat, PairShape, PromptTemplate, TemplateOrigin};
use super::wire::{ChatBackend, ChatRequest};
use super::{AgentError, CompletionSource};
use crate::selection::FewShotSet;

/// Default number of prompts to request from the generation agent.
pub const DEFAULT_GENERATION_ATTEMPTS: u32 = 5;
/// Default sampling temperature for the generation agent.
pub const DEFAULT_GENERATION_TEMPERATURE: f64 = 0.7;
/// Default edit-similarity threshold for merging near-duplicate prompts.
pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.9;

/// Ask the backend for `n_attempts` candidate prompts, one call per attempt.
///
/// Each attempt gets its own request seed (base seed plus attempt index) so
/// attempts stay distinct in the replay cache and reproduce across runs.
/// Empty completions are dropped and logged; all-empty is an error.
pub async fn generate_candidate_prompts(
    source: &CompletionSource<'_>,
    backend: &dyn ChatBackend,
    shots: &FewShotSet,
    n_attempts: u32,
) -> Result<Vec<PromptTemplate>, AgentError> {
    let config = backend.config();
    let messages = build_generation_request(shots);
    let mut templates = Vec::new();
    for attempt in 0..n_attempts {
        let request = ChatRequest {
            model: config.model_id.clone(),
            messages: messages.clone(),
            temperature: config.temperature_or(DEFAULT_GENERATION_TEMPERATURE),
            max_tokens: config.max_new_tokens,
            seed: Some(config.request_seed.unwrap_or(0) + attempt as u64),
        };
        let (response, _cached) = source.complete(backend, &request).await?;
        let instruction = response.content.trim().to_string();
        if instruction.is_empty() {
            log::warn!(
                "generation attempt {}/{n_attempts} on {} returned empty output, dropping it",
                attempt + 1,
                backend.name()
            );
            continue;
        }
        templates.push(PromptTemplate {
            id: format!("G{}", attempt + 1),
            origin: TemplateOrigin::Generated {
                backend: backend.name().to_string(),
            },
            instruction,
            answer_format: AnswerFormat::YesNo,
            shape: PairShape::Statements,
            raw_response: Some(response.content),
        });
    }
    if templates.is_empty() {
        return Err(AgentError::AllAttemptsEmpty(n_attempts));
    }
    Ok(templates)
}

fn normalize_instruction(s: &str) -> String {
    s.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn levenshtein(a: &[char], b: &[char]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Normalized edit similarity on case-folded, whitespace-collapsed text.
pub fn edit_similarity(a: &str, b: &str) -> f64 {
    let ca: Vec<char> = a.chars().collect();
    let cb: Vec<char> = b.chars().collect();
    let longest = ca.len().max(cb.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(&ca, &cb) as f64 / longest as f64
}

/// Greedy transitive clustering of near-duplicate prompts.
///
/// A candidate joins the first cluster where it is at least `threshold`
/// similar to any member, so similarity chains collapse into one cluster.
/// The earliest candidate of each cluster survives; first-occurrence order
/// is preserved. Idempotent: survivors are pairwise below the threshold.
pub fn merge_similar_prompts(
    candidates: Vec<PromptTemplate>,
    threshold: f64,
) -> Vec<PromptTemplate> {
    let mut clusters: Vec<(PromptTemplate, Vec<String>)> = Vec::new();
    for candidate in candidates {
        let norm = normalize_instruction(&candidate.instruction);
        match clusters.iter_mut().find(|(_, members)| {
            members
                .iter()
                .any(|m| edit_similarity(m, &norm) >= threshold)
        }) {
            Some((_, members)) => members.push(norm),
            None => clusters.push((candidate, vec![norm])),
        }
    }
    clusters.into_iter().map(|(survivor, _)| survivor).collect()
}
