//! The classification agent: one chat call per (template, claim pair),
//! served from the replay cache when possible.

use super::parse::{parse_label, ParsedLabel};
use super::render::render_classification_prompt;
use super::templates::PromptTemplate;
use super::wire::{ChatBackend, ChatMessage, ChatRequest};
use super::{AgentError, CompletionSource};
use crate::corpus::ClaimPair;
use crate::selection::FewShotSet;
use serde::{Deserialize, Serialize};

/// Everything recorded about one classification call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub pair_id: String,
    pub template_id: String,
    pub rendered_prompt: String,
    pub raw_response: String,
    pub parsed: ParsedLabel,
    pub latency_ms: u64,
    pub cached: bool,
}

/// Classify one claim pair under a rendered prompt.
pub async fn classify_pair(
    source: &CompletionSource<'_>,
    backend: &dyn ChatBackend,
    template: &PromptTemplate,
    shots: &FewShotSet,
    query: &ClaimPair,
) -> Result<PredictionRecord, AgentError> {
    let config = backend.config();
    let rendered = render_classification_prompt(template, shots, query)?;
    let request = ChatRequest {
        model: config.model_id.clone(),
        messages: vec![ChatMessage::user(rendered.clone())],
        temperature: config.temperature_or(0.0),
        max_tokens: config.max_new_tokens,
        seed: config.request_seed,
    };
    let started = std::time::Instant::now();
    let (response, cached) = source.complete(backend, &request).await?;
    let latency_ms = started.elapsed().as_millis() as u64;
    let parsed = parse_label(&response.content, template.answer_format);
    Ok(PredictionRecord {
        pair_id: query.id.clone(),
        template_id: template.id.clone(),
        rendered_prompt: rendered,
        raw_response: response.content,
        parsed,
        latency_ms,
        cached,
    })
}

/// Classify every pair of a dataset in input order, at most `parallelism`
/// calls in flight. Output order matches dataset order regardless of
/// completion order.
pub async fn classify_dataset(
    source: &CompletionSource<'_>,
    backend: &dyn ChatBackend,
    template: &PromptTemplate,
    shots: &FewShotSet,
    dataset: &crate::corpus::Dataset,
    parallelism: usize,
) -> Result<Vec<PredictionRecord>, AgentError> {
    use futures::StreamExt;
    let results: Vec<Result<PredictionRecord, AgentError>> = futures::stream::iter(
        dataset
            .pairs()
            .iter()
            .map(|pair| classify_pair(source, backend, template, shots, pair)),
    )
    .buffered(parallelism.max(1))
    .collect()
    .await;
    results.into_iter().collect()
}
