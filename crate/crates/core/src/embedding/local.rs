//! Deterministic offline embedder based on signed feature hashing.
//!
//! Features are character trigrams of the space-padded text plus whole
//! whitespace-separated words. Each feature is hashed with seeded 64-bit
//! FNV-1a; the low bits pick one of the 1536 buckets and the top bit picks the
//! sign. The accumulated vector is L2-normalized. The empty string (and any
//! text whose features cancel exactly) maps to the all-zero sentinel vector.

use async_trait::async_trait;

use super::{Embedder, EmbeddingError, EmbeddingVector, EMBEDDING_DIM};

/// Model tag carried by vectors from [`local_test_embed`].
pub const LOCAL_MODEL_TAG: &str = "local-hash-v1";

const SEED: u64 = 0x5eed_7e3b_1a7e_0001;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
const WORD_WEIGHT: f64 = 2.0;

fn fnv1a(kind: u8, bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for b in SEED.to_le_bytes().iter().chain(std::iter::once(&kind)).chain(bytes) {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    // FNV's low bits mix poorly on short inputs; fold the high half in.
    h ^ (h >> 29)
}

fn add_feature(acc: &mut [f64], kind: u8, bytes: &[u8], weight: f64) {
    let h = fnv1a(kind, bytes);
    let bucket = (h % EMBEDDING_DIM as u64) as usize;
    let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
    acc[bucket] += sign * weight;
}

/// Embeds text without any network access. Pure and platform independent.
pub fn local_test_embed(text: &str) -> EmbeddingVector {
    let mut acc = vec![0.0f64; EMBEDDING_DIM];
    if !text.is_empty() {
        let padded: Vec<char> = std::iter::once(' ')
            .chain(text.chars())
            .chain(std::iter::once(' '))
            .collect();
        let mut buf = [0u8; 12];
        for w in padded.windows(3) {
            let mut n = 0;
            for c in w {
                n += c.encode_utf8(&mut buf[n..]).len();
            }
            add_feature(&mut acc, b'c', &buf[..n], 1.0);
        }
        for word in text.split_whitespace() {
            add_feature(&mut acc, b'w', word.as_bytes(), WORD_WEIGHT);
        }
        let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            acc.iter_mut().for_each(|v| *v /= norm);
        }
    }
    EmbeddingVector::new(acc, LOCAL_MODEL_TAG).expect("finite, correct dimension")
}

/// [`Embedder`] wrapper around [`local_test_embed`].
#[derive(Debug, Default, Clone, Copy)]
pub struct LocalHashEmbedder;

#[async_trait]
impl Embedder for LocalHashEmbedder {
    fn model_tag(&self) -> &str {
        LOCAL_MODEL_TAG
    }

    async fn embed_batch(&self, texts: &[String]) -> Result<Vec<EmbeddingVector>, EmbeddingError> {
        Ok(texts.iter().map(|t| local_test_embed(t)).collect())
    }
}
