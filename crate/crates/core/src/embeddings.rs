//! Text embeddings and within-pair cosine similarity.
//!
//! Two providers: a remote batch endpoint (the usual deployment) and a
//! deterministic hashed character-trigram embedder that keeps every
//! downstream selector testable offline. Vectors are cached on disk keyed
//! by (provider id, exact text).

use crate::corpus::Dataset;
use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Fixed-length embedding; every entry is finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector(Vec<f64>);

/// Within-pair similarity score for one claim pair, in [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    pub pair_id: String,
    pub score: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum EmbeddingError {
    #[error("embedding provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("cannot embed empty text")]
    EmptyText,
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity of an all-zero vector is undefined")]
    ZeroVector,
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("pair {pair_id}: {source}")]
    ForPair {
        pair_id: String,
        #[source]
        source: Box<EmbeddingError>,
    },
    #[error("embedding cache: {0}")]
    Cache(#[from] std::io::Error),
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, EmbeddingError> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite);
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// A source of embeddings with a fixed dimension and a stable identity.
///
/// Same input and same provider must give the same vector; implementations
/// may be called concurrently.
#[async_trait]
pub trait EmbeddingProvider: Send + Sync {
    /// Stable identifier used as the cache-key namespace.
    fn id(&self) -> String;

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;

    async fn embed(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        if text.trim().is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let mut out = self.embed_batch(&[text.to_string()]).await?;
        Ok(out.remove(0))
    }
}

/// Cosine similarity, clamped to [-1, 1] after floating-point rounding.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64, EmbeddingError> {
    if a.dim() != b.dim() {
        return Err(EmbeddingError::DimensionMismatch(a.dim(), b.dim()));
    }
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.values().iter().zip(b.values()) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Err(EmbeddingError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Score every pair in the dataset: cosine of the two claim embeddings.
///
/// One score per pair, input order preserved. Unique texts are embedded in
/// chunks, at most `parallelism` chunks in flight.
pub async fn score_pairs(
    dataset: &Dataset,
    provider: &dyn EmbeddingProvider,
    parallelism: usize,
) -> Result<Vec<ScoredPair>, EmbeddingError> {
    use futures::StreamExt;
    const CHUNK: usize = 64;

    let mut unique: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for p in dataset.pairs() {
        for text in [&p.claim_a, &p.claim_b] {
            if text.trim().is_empty() {
                return Err(EmbeddingError::ForPair {
                    pair_id: p.id.clone(),
                    source: Box::new(EmbeddingError::EmptyText),
                });
            }
            if seen.insert(text.clone()) {
                unique.push(text.clone());
            }
        }
    }

    let chunks: Vec<Vec<String>> = unique.chunks(CHUNK).map(|c| c.to_vec()).collect();
    let embedded: Vec<Result<Vec<EmbeddingVector>, EmbeddingError>> =
        futures::stream::iter(chunks.iter().map(|c| provider.embed_batch(c)))
            .buffered(parallelism.max(1))
            .collect()
            .await;

    let mut by_text = std::collections::HashMap::new();
    for (chunk, result) in chunks.iter().zip(embedded) {
        let vectors = result?;
        for (text, vector) in chunk.iter().zip(vectors) {
            by_text.insert(text.clone(), vector);
        }
    }

    let mut scores = Vec::with_capacity(dataset.len());
    for p in dataset.pairs() {
        let va = &by_text[&p.claim_a];
        let vb = &by_text[&p.claim_b];
        let score = cosine_similarity(va, vb).map_err(|e| EmbeddingError::ForPair {
            pair_id: p.id.clone(),
            source: Box::new(e),
        })?;
        scores.push(ScoredPair {
            pair_id: p.id.clone(),
            score,
        });
    }
    Ok(scores)
}

pub const DEFAULT_FALLBACK_DIM: usize = 256;

/// Deterministic offline embedder: hashed character-trigram frequencies,
/// L2-normalized. No external dependencies, stable across platforms.
#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    dim: usize,
}

impl TrigramEmbedder {
    pub fn new(dim: usize) -> Self {
        TrigramEmbedder { dim: dim.max(1) }
    }

    fn embed_one(&self, text: &str) -> Result<EmbeddingVector, EmbeddingError> {
        let normalized: String = text
            .to_lowercase()
            .split_whitespace()
            .collect::<Vec<_>>()
            .join(" ");
        if normalized.is_empty() {
            return Err(EmbeddingError::EmptyText);
        }
        let chars: Vec<char> = normalized.chars().collect();
        let mut counts = vec![0.0f64; self.dim];
        if chars.len() < 3 {
            counts[fnv1a(normalized.as_bytes()) as usize % self.dim] += 1.0;
        } else {
            for window in chars.windows(3) {
                let gram: String = window.iter().collect();
                counts[fnv1a(gram.as_bytes()) as usize % self.dim] += 1.0;
            }
        }
        let norm = counts.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in &mut counts {
            *v /= norm;
        }
        EmbeddingVector::new(counts)
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        TrigramEmbedder::new(DEFAULT_FALLBACK_DIM)
    }
}

#[async_trait]
impl EmbeddingProvider for TrigramEmbedder {
    fn id(&self) -> String {
        format!("trigram-{}", self.dim)
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        texts.iter().map(|t| self.embed_one(t)).collect()
    }
}

// FNV-1a: stable across platforms and releases, unlike std's hasher.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Remote batch-embedding endpoint configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemoteEmbedderConfig {
    pub endpoint: String,
    /// Model identifier sent with every request.
    pub model_id: String,
    /// Environment variable holding the bearer token, if the endpoint needs one.
    #[serde(default)]
    pub auth_env: Option<String>,
}

pub const DEFAULT_REMOTE_MODEL_ID: &str = "All-MiniLM-L6-v2";

/// HTTP embedding provider: POSTs `{model, input: [texts]}` and expects
/// `{data: [{embedding: [...]}]}` back.
pub struct RemoteEmbedder {
    config: RemoteEmbedderConfig,
    client: reqwest::Client,
    // dim pinned on first response; a provider must keep it constant
    dim: std::sync::OnceLock<usize>,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: &'a [String],
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedItem>,
}

#[derive(Deserialize)]
struct EmbedItem {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(config: RemoteEmbedderConfig) -> Self {
        RemoteEmbedder {
            config,
            client: reqwest::Client::new(),
            dim: std::sync::OnceLock::new(),
        }
    }
}

#[async_trait]
impl EmbeddingProvider for RemoteEmbedder {
    fn id(&self) -> String {
        format!("remote-{}", self.config.model_id)
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        let mut request = self.client.post(&self.config.endpoint).json(&EmbedRequest {
            model: &self.config.model_id,
            input: texts,
        });
        if let Some(var) = &self.config.auth_env {
            if let Ok(token) = std::env::var(var) {
                request = request.bearer_auth(token);
            }
        }
        let response = request
            .send()
            .await
            .map_err(|e| EmbeddingError::ProviderUnavailable(e.to_string()))?;
        if !response.status().is_success() {
            return Err(EmbeddingError::ProviderUnavailable(format!(
                "endpoint returned {}",
                response.status()
            )));
        }
        let body: EmbedResponse = response
            .json()
            .await
            .map_err(|e| EmbeddingError::ProviderUnavailable(e.to_string()))?;
        if body.data.len() != texts.len() {
            return Err(EmbeddingError::ProviderUnavailable(format!(
                "asked for {} embeddings, got {}",
                texts.len(),
                body.data.len()
            )));
        }
        let vectors: Vec<EmbeddingVector> = body
            .data
            .into_iter()
            .map(|item| EmbeddingVector::new(item.embedding))
            .collect::<Result<_, _>>()?;
        for v in &vectors {
            let pinned = *self.dim.get_or_init(|| v.dim());
            if v.dim() != pinned {
                return Err(EmbeddingError::ProviderUnavailable(format!(
                    "endpoint changed embedding dimension from {pinned} to {}",
                    v.dim()
                )));
            }
        }
        Ok(vectors)
    }
}

/// Disk cache of embeddings, one JSON file per (provider id, text) entry.
///
/// Writes go through a temp file and rename, so concurrent readers never see
/// a partial entry; identical keys always carry identical values, so
/// last-write-wins is harmless.
pub struct EmbeddingCache {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct CacheEntry {
    provider_id: String,
    text: String,
    vector: EmbeddingVector,
}

impl EmbeddingCache {
    pub fn open(dir: &Path) -> Result<Self, EmbeddingError> {
        std::fs::create_dir_all(dir)?;
        Ok(EmbeddingCache {
            dir: dir.to_path_buf(),
        })
    }

    fn entry_path(&self, provider_id: &str, text: &str) -> PathBuf {
        let mut hasher = Sha256::new();
        hasher.update(provider_id.as_bytes());
        hasher.update([0]);
        hasher.update(text.as_bytes());
        self.dir
            .join(format!("{}.json", hex::encode(hasher.finalize())))
    }

    pub fn get(&self, provider_id: &str, text: &str) -> Option<EmbeddingVector> {
        let bytes = std::fs::read(self.entry_path(provider_id, text)).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        Some(entry.vector)
    }

    pub fn put(
        &self,
        provider_id: &str,
        text: &str,
        vector: &EmbeddingVector,
    ) -> Result<(), EmbeddingError> {
        let path = self.entry_path(provider_id, text);
        let entry = CacheEntry {
            provider_id: provider_id.to_string(),
            text: text.to_string(),
            vector: vector.clone(),
        };
        let tmp = path.with_extension(format!("tmp.{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(&entry).expect("serializable"))?;
        std::fs::rename(&tmp, &path)?;
        Ok(())
    }
}

/// Wraps a provider with the disk cache and a hit/miss tally.
pub struct CachedEmbedder {
    inner: Box<dyn EmbeddingProvider>,
    cache: EmbeddingCache,
    hits: std::sync::atomic::AtomicU64,
    misses: std::sync::atomic::AtomicU64,
}

impl CachedEmbedder {
    pub fn new(inner: Box<dyn EmbeddingProvider>, cache: EmbeddingCache) -> Self {
        CachedEmbedder {
            inner,
            cache,
            hits: 0.into(),
            misses: 0.into(),
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(std::sync::atomic::Ordering::Relaxed)
    }

    pub fn misses(&self) -> u64 {
        self.misses.load(std::sync::atomic::Ordering::Relaxed)
    }
}

#[async_trait]
impl EmbeddingProvider for CachedEmbedder {
    fn id(&self) -> String {
        self.inner.id()
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        use std::sync::atomic::Ordering;
        let provider_id = self.id();
        let mut out: Vec<Option<EmbeddingVector>> = Vec::with_capacity(texts.len());
        let mut missing: Vec<String> = Vec::new();
        let mut missing_at: Vec<usize> = Vec::new();
        for (i, text) in texts.iter().enumerate() {
            match self.cache.get(&provider_id, text) {
                Some(v) => {
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    out.push(Some(v));
                }
                None => {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    out.push(None);
                    missing.push(text.clone());
                    missing_at.push(i);
                }
            }
        }
        if !missing.is_empty() {
            let fresh = self.inner.embed_batch(&missing).await?;
            for ((i, text), vector) in missing_at.iter().zip(&missing).zip(fresh) {
                self.cache.put(&provider_id, text, &vector)?;
                out[*i] = Some(vector);
            }
        }
        Ok(out.into_iter().map(|v| v.expect("filled")).collect())
    }
}
