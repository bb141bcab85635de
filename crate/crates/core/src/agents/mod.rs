//! The two LLM agents and their plumbing: wire protocol, replay cache,
//! prompt templates, rendering, generation, classification, label parsing.

pub mod cache;
pub mod classify;
pub mod generate;
pub mod parse;
pub mod render;
pub mod templates;
pub mod wire;

pub use cache::{CacheStats, ResponseCache};
pub use classify::{classify_dataset, classify_pair, PredictionRecord};
pub use generate::{
    generate_candidate_prompts, merge_similar_prompts, DEFAULT_GENERATION_ATTEMPTS,
    DEFAULT_GENERATION_TEMPERATURE, DEFAULT_MERGE_THRESHOLD,
};
pub use parse::{parse_label, ParsedLabel};
pub use render::{
    build_generation_request, render_classification_prompt, GENERATION_SYSTEM_PROMPT,
};
pub use templates::{
    builtin_template, builtin_templates, AnswerFormat, PairShape, PromptTemplate, TemplateOrigin,
};
pub use wire::{
    BackendConfig, ChatBackend, ChatMessage, ChatRequest, ChatResponse, HttpBackend, RetryPolicy,
    Role, StubBackend, StubMode, DEFAULT_MAX_NEW_TOKENS,
};

#[derive(Debug, thiserror::Error)]
pub enum AgentError {
    #[error("backend error after {attempts} attempt(s){}: {body}",
        status.map(|s| format!(" (http {s})")).unwrap_or_default())]
    Backend {
        status: Option<u16>,
        body: String,
        attempts: u32,
    },
    #[error("all {0} generation attempts returned empty output")]
    AllAttemptsEmpty(u32),
    #[error("claim pair {0} has an empty claim")]
    EmptyClaim(String),
    #[error("placeholder mismatch: {0}")]
    PlaceholderMismatch(String),
    #[error("invalid backend config: {0}")]
    InvalidBackend(String),
    #[error("response cache failure: {0}")]
    Cache(String),
}

/// A completion path with an optional replay cache in front of the backend.
///
/// Cache entries are immutable once written; a warm cache answers without
/// touching the backend at all.
pub struct CompletionSource<'a> {
    cache: Option<&'a ResponseCache>,
}

impl CompletionSource<'_> {
    pub fn uncached() -> CompletionSource<'static> {
        CompletionSource { cache: None }
    }

    pub fn cached(cache: &ResponseCache) -> CompletionSource<'_> {
        CompletionSource { cache: Some(cache) }
    }

    /// Returns the response and whether it came from the cache.
    pub async fn complete(
        &self,
        backend: &dyn ChatBackend,
        request: &ChatRequest,
    ) -> Result<(ChatResponse, bool), AgentError> {
        if let Some(cache) = self.cache {
            if let Some(response) = cache.get(request) {
                return Ok((response, true));
            }
        }
        let response = backend.complete(request).await?;
        if let Some(cache) = self.cache {
            cache.put(request, &response)?;
        }
        Ok((response, false))
    }
}
