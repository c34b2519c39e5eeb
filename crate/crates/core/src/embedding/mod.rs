//! Query embeddings: pluggable backends behind a content-addressed cache.

mod cache;
mod local;
mod remote;

pub use cache::{cache_key, CacheError, CacheKey, CacheStats, EmbeddingCache, CACHE_FORMAT_VERSION};
pub use local::{local_test_embed, LocalHashEmbedder, LOCAL_MODEL_TAG};
pub use remote::{OpenAiEmbedder, OpenAiEmbedderConfig};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Query;

/// Dimension of every query embedding.
pub const EMBEDDING_DIM: usize = 1536;

/// Maximum texts per remote request during bulk extraction.
pub const MAX_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("embedding transport failed after {attempts} attempt(s): {message}")]
    Transport {
        message: String,
        retryable: bool,
        attempts: u32,
    },
    #[error("embedding integrity error: {0}")]
    Integrity(String),
    #[error("embedding input rejected: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

/// A fixed-size query embedding tagged with the backend that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    values: Vec<f64>,
    model_tag: String,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>, model_tag: impl Into<String>) -> Result<Self, EmbeddingError> {
        if values.len() != EMBEDDING_DIM {
            return Err(EmbeddingError::Integrity(format!(
                "expected {EMBEDDING_DIM} dimensions, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(EmbeddingError::Integrity(format!(
                "non-finite value at dimension {i}"
            )));
        }
        Ok(Self {
            values,
            model_tag: model_tag.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn model_tag(&self) -> &str {
        &self.model_tag
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// An embedding backend.
#[async_trait]
pub trait Embedder: Send + Sync {
    /// Identifies the model; part of every cache key.
    fn model_tag(&self) -> &str;

    /// Embeds already-normalized texts, one vector per input in order.
    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError>;
}

/// Backend used when embeddings are switched off; every call fails.
#[derive(Debug, Default, Clone)]
pub struct DisabledEmbedder;

#[async_trait]
impl Embedder for DisabledEmbedder {
    fn model_tag(&self) -> &str {
        "disabled"
    }

    async fn embed_batch(&self, _texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        Err(EmbeddingError::Transport {
            message: "embedding backend disabled".into(),
            retryable: false,
            attempts: 0,
        })
    }
}

/// Trims and collapses internal whitespace runs to single spaces. Case is kept.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Embeds one query, consulting the cache first.
pub async fn embed(
    query: &Query,
    backend: &dyn Embedder,
    cache: &EmbeddingCache,
) -> Result<EmbeddingVector, EmbeddingError> {
    let text = normalize_text(&query.text);
    if text.is_empty() {
        return Err(EmbeddingError::InvalidInput(format!(
            "query `{}` has empty text",
            query.id
        )));
    }
    let key = cache_key(&text, backend.model_tag());
    if let Some(hit) = cache.get(&key) {
        return Ok(hit);
    }
    let mut fetched = backend.embed_batch(std::slice::from_ref(&text)).await?;
    if fetched.len() != 1 {
        return Err(EmbeddingError::Integrity(format!(
            "backend returned {} vectors for 1 input",
            fetched.len()
        )));
    }
    let vector = fetched.pop().expect("one vector");
    check_tag(&vector, backend)?;
    cache.insert(key, vector.clone())?;
    Ok(vector)
}

/// Embeds many texts, fetching only cache misses in batches of [`MAX_BATCH`].
pub async fn embed_all(
    texts: &[String],
    backend: &dyn Embedder,
    cache: &EmbeddingCache,
) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
    let normalized: Vec<String> = texts.iter().map(|t| normalize_text(t)).collect();
    if let Some(i) = normalized.iter().position(|t| t.is_empty()) {
        return Err(EmbeddingError::InvalidInput(format!("text {i} is empty")));
    }
    let keys: Vec<CacheKey> = normalized
        .iter()
        .map(|t| cache_key(t, backend.model_tag()))
        .collect();
    let mut out: Vec<Option<EmbeddingVector>> = keys.iter().map(|k| cache.get(k)).collect();

    let mut misses: Vec<usize> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, v) in out.iter().enumerate() {
        if v.is_none() && seen.insert(keys[i]) {
            misses.push(i);
        }
    }
    for chunk in misses.chunks(MAX_BATCH) {
        let batch: Vec<String> = chunk.iter().map(|&i| normalized[i].clone()).collect();
        let vectors = backend.embed_batch(&batch).await?;
        if vectors.len() != batch.len() {
            return Err(EmbeddingError::Integrity(format!(
                "backend returned {} vectors for {} inputs",
                vectors.len(),
                batch.len()
            )));
        }
        for (&i, v) in chunk.iter().zip(vectors) {
            check_tag(&v, backend)?;
            cache.insert(keys[i], v)?;
        }
    }
    for (i, slot) in out.iter_mut().enumerate() {
        if slot.is_none() {
            *slot = cache.get(&keys[i]);
        }
    }
    Ok(out.into_iter().map(|v| v.expect("filled above")).collect())
}

fn check_tag(v: &EmbeddingVector, backend: &dyn Embedder) -> Result<(), EmbeddingError> {
    if v.model_tag() != backend.model_tag() {
        return Err(EmbeddingError::Integrity(format!(
            "backend `{}` returned a vector tagged `{}`",
            backend.model_tag(),
            v.model_tag()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicUsize, Ordering};

    struct Counting {
        inner: LocalHashEmbedder,
        calls: AtomicUsize,
        texts: AtomicUsize,
    }

    impl Counting {
        fn new() -> Self {
            Self {
                inner: LocalHashEmbedder,
                calls: AtomicUsize::new(0),
                texts: AtomicUsize::new(0),
            }
        }
    }

    #[async_trait]
    impl Embedder for Counting {
        fn model_tag(&self) -> &str {
            self.inner.model_tag()
        }

        async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            self.texts.fetch_add(texts.len(), Ordering::SeqCst);
            self.inner.embed_batch(texts).await
        }
    }

    struct WrongDim;

    #[async_trait]
    impl Embedder for WrongDim {
        fn model_tag(&self) -> &str {
            "wrong"
        }

        async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
            texts
                .iter()
                .map(|_| EmbeddingVector::new(vec![0.0; 3], "wrong"))
                .collect()
        }
    }

    fn rt() -> tokio::runtime::Runtime {
        tokio::runtime::Builder::new_current_thread().build().unwrap()
    }

    #[test]
    fn second_embed_is_a_bit_identical_hit() {
        rt().block_on(async {
            let backend = Counting::new();
            let cache = EmbeddingCache::in_memory();
            let q = Query::new("a", "How do magnets work?").unwrap();
            let first = embed(&q, &backend, &cache).await.unwrap();
            let second = embed(&q, &backend, &cache).await.unwrap();
            assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
            assert_eq!(first.values().len(), EMBEDDING_DIM);
            assert!(first
                .values()
                .iter()
                .zip(second.values())
                .all(|(a, b)| a.to_bits() == b.to_bits()));
            assert_eq!(cache.stats().hits, 1);
        });
    }

    #[test]
    fn whitespace_variants_share_an_entry() {
        rt().block_on(async {
            let backend = Counting::new();
            let cache = EmbeddingCache::in_memory();
            let a = Query::new("a", "  What   is\tRust? ").unwrap();
            let b = Query::new("b", "What is Rust?").unwrap();
            let c = Query::new("c", "what is rust?").unwrap();
            embed(&a, &backend, &cache).await.unwrap();
            embed(&b, &backend, &cache).await.unwrap();
            assert_eq!(backend.calls.load(Ordering::SeqCst), 1);
            embed(&c, &backend, &cache).await.unwrap();
            assert_eq!(backend.calls.load(Ordering::SeqCst), 2);
        });
    }

    #[test]
    fn hundred_distinct_texts_fetch_once_each() {
        rt().block_on(async {
            let backend = Counting::new();
            let cache = EmbeddingCache::in_memory();
            let queries: Vec<Query> = (0..100)
                .map(|i| Query::new(format!("q{i}"), format!("distinct question number {i}")).unwrap())
                .collect();
            for q in &queries {
                embed(q, &backend, &cache).await.unwrap();
            }
            assert_eq!(backend.calls.load(Ordering::SeqCst), 100);
            for q in &queries {
                embed(q, &backend, &cache).await.unwrap();
            }
            assert_eq!(backend.calls.load(Ordering::SeqCst), 100);
        });
    }

    #[test]
    fn bulk_extraction_batches_misses() {
        rt().block_on(async {
            let backend = Counting::new();
            let cache = EmbeddingCache::in_memory();
            let mut texts: Vec<String> = (0..150).map(|i| format!("text {i}")).collect();
            texts.push("text 3".into());
            let out = embed_all(&texts, &backend, &cache).await.unwrap();
            assert_eq!(out.len(), 151);
            assert_eq!(backend.texts.load(Ordering::SeqCst), 150);
            assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
            assert_eq!(out[3], out[150]);
            embed_all(&texts, &backend, &cache).await.unwrap();
            assert_eq!(backend.calls.load(Ordering::SeqCst), 3);
        });
    }

    #[test]
    fn dimension_mismatch_is_integrity_error() {
        rt().block_on(async {
            let cache = EmbeddingCache::in_memory();
            let q = Query::new("a", "hello").unwrap();
            let err = embed(&q, &WrongDim, &cache).await.unwrap_err();
            assert!(matches!(err, EmbeddingError::Integrity(_)));
            assert_eq!(cache.len(), 0);
        });
    }

    #[test]
    fn disabled_backend_surfaces_transport_error() {
        rt().block_on(async {
            let cache = EmbeddingCache::in_memory();
            let q = Query::new("a", "hello").unwrap();
            let err = embed(&q, &DisabledEmbedder, &cache).await.unwrap_err();
            assert!(matches!(err, EmbeddingError::Transport { retryable: false, .. }));
        });
    }

    #[test]
    fn returned_tag_matches_backend() {
        rt().block_on(async {
            let cache = EmbeddingCache::in_memory();
            let q = Query::new("a", "hello").unwrap();
            let v = embed(&q, &LocalHashEmbedder, &cache).await.unwrap();
            assert_eq!(v.model_tag(), LOCAL_MODEL_TAG);
        });
    }
}
