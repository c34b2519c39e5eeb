//! Content-addressed embedding cache with an append-only file format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! header : magic "TRECACHE" (8) | version u8 | dim u32
//! entry  : key [32] | created_at u64 (unix secs) | tag_len u16 | tag bytes
//!          | dim x f64 | crc32 u32 over the preceding entry bytes
//! ```
//!
//! Entries are appended as they are inserted, so a cache file can be shared
//! across runs. Loading verifies every entry checksum and refuses truncated
//! tails.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{EmbeddingVector, EMBEDDING_DIM};

const MAGIC: &[u8; 8] = b"TRECACHE";
/// Current on-disk format version.
pub const CACHE_FORMAT_VERSION: u8 = 1;
const HEADER_LEN: usize = 8 + 1 + 4;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("cache file corrupt in {section}: {detail}")]
    Integrity { section: String, detail: String },
    #[error("cache file version {found} is not supported (expected {CACHE_FORMAT_VERSION})")]
    UnsupportedVersion { found: u8 },
}

fn integrity(section: impl Into<String>, detail: impl Into<String>) -> CacheError {
    CacheError::Integrity {
        section: section.into(),
        detail: detail.into(),
    }
}

/// SHA-256 of the normalized text and model tag.
pub type CacheKey = [u8; 32];

pub fn cache_key(normalized_text: &str, model_tag: &str) -> CacheKey {
    let mut hasher = Sha256::new();
    hasher.update(normalized_text.as_bytes());
    hasher.update([0u8]);
    hasher.update(model_tag.as_bytes());
    hasher.finalize().into()
}

#[derive(Debug, Clone)]
struct CacheEntry {
    vector: EmbeddingVector,
    created_at: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub hits: u64,
    pub misses: u64,
    pub entries: usize,
}

/// Thread-safe embedding cache. Reads share a lock; inserts take it exclusively.
#[derive(Debug)]
pub struct EmbeddingCache {
    entries: RwLock<HashMap<CacheKey, CacheEntry>>,
    sink: Option<Mutex<BufWriter<File>>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

impl EmbeddingCache {
    pub fn in_memory() -> Self {
        Self {
            entries: RwLock::new(HashMap::new()),
            sink: None,
            path: None,
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        }
    }

    /// Opens (or creates) a persistent cache; new entries are appended to `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref();
        let entries = if path.exists() && std::fs::metadata(path)?.len() > 0 {
            read_entries(path)?
        } else {
            let mut f = File::create(path)?;
            write_header(&mut f)?;
            f.sync_all()?;
            HashMap::new()
        };
        let file = OpenOptions::new().append(true).open(path)?;
        Ok(Self {
            entries: RwLock::new(entries),
            sink: Some(Mutex::new(BufWriter::new(file))),
            path: Some(path.to_path_buf()),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    /// Loads a snapshot without attaching a writer.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let cache = Self::in_memory();
        *cache.entries.write() = read_entries(path.as_ref())?;
        Ok(cache)
    }

    /// Writes a full snapshot (header plus every entry) to `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CacheError> {
        let mut out = BufWriter::new(File::create(path)?);
        write_header(&mut out)?;
        let entries = self.entries.read();
        let mut keys: Vec<&CacheKey> = entries.keys().collect();
        keys.sort();
        for key in keys {
            let e = &entries[key];
            out.write_all(&encode_entry(key, e))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &CacheKey) -> Option<EmbeddingVector> {
        let found = self.entries.read().get(key).map(|e| e.vector.clone());
        if found.is_some() {
            self.hits.fetch_add(1, Ordering::Relaxed);
        } else {
            self.misses.fetch_add(1, Ordering::Relaxed);
        }
        found
    }

    pub fn contains(&self, key: &CacheKey) -> bool {
        self.entries.read().contains_key(key)
    }

    /// Stores a vector. Re-inserting an existing key overwrites it in memory
    /// and appends a new record; the last record wins on reload.
    pub fn insert(&self, key: CacheKey, vector: EmbeddingVector) -> Result<(), CacheError> {
        let entry = CacheEntry {
            vector,
            created_at: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        };
        if let Some(sink) = &self.sink {
            let mut w = sink.lock();
            w.write_all(&encode_entry(&key, &entry))?;
            w.flush()?;
        }
        self.entries.write().insert(key, entry);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            entries: self.len(),
        }
    }
}

fn write_header(w: &mut impl Write) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&[CACHE_FORMAT_VERSION])?;
    w.write_all(&(EMBEDDING_DIM as u32).to_le_bytes())
}

fn encode_entry(key: &CacheKey, e: &CacheEntry) -> Vec<u8> {
    let tag = e.vector.model_tag().as_bytes();
    let mut buf = Vec::with_capacity(32 + 8 + 2 + tag.len() + EMBEDDING_DIM * 8 + 4);
    buf.extend_from_slice(key);
    buf.extend_from_slice(&e.created_at.to_le_bytes());
    buf.extend_from_slice(&(tag.len() as u16).to_le_bytes());
    buf.extend_from_slice(tag);
    for v in e.vector.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

fn read_entries(path: &Path) -> Result<HashMap<CacheKey, CacheEntry>, CacheError> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

fn decode(bytes: &[u8]) -> Result<HashMap<CacheKey, CacheEntry>, CacheError> {
    if bytes.len() < HEADER_LEN {
        return Err(integrity("header", "file shorter than header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(integrity("header", "bad magic"));
    }
    if bytes[8] != CACHE_FORMAT_VERSION {
        return Err(CacheError::UnsupportedVersion { found: bytes[8] });
    }
    let dim = u32::from_le_bytes(bytes[9..13].try_into().expect("4 bytes")) as usize;
    if dim != EMBEDDING_DIM {
        return Err(integrity("header", format!("dimension {dim}, expected {EMBEDDING_DIM}")));
    }

    let mut entries = HashMap::new();
    let mut pos = HEADER_LEN;
    let mut index = 0usize;
    while pos < bytes.len() {
        let section = format!("entry {index} at byte {pos}");
        let start = pos;
        let take = |pos: &mut usize, n: usize| -> Result<&[u8], CacheError> {
            let end = pos
                .checked_add(n)
                .filter(|end| *end <= bytes.len())
                .ok_or_else(|| integrity(section.clone(), "truncated"))?;
            let slice = &bytes[*pos..end];
            *pos = end;
            Ok(slice)
        };
        let key: CacheKey = take(&mut pos, 32)?.try_into().expect("32 bytes");
        let created_at = u64::from_le_bytes(take(&mut pos, 8)?.try_into().expect("8 bytes"));
        let tag_len = u16::from_le_bytes(take(&mut pos, 2)?.try_into().expect("2 bytes")) as usize;
        let tag = take(&mut pos, tag_len)?.to_vec();
        let raw = take(&mut pos, EMBEDDING_DIM * 8)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let body_end = pos;
        let crc = u32::from_le_bytes(take(&mut pos, 4)?.try_into().expect("4 bytes"));
        if crc32fast::hash(&bytes[start..body_end]) != crc {
            return Err(integrity(section, "checksum mismatch"));
        }
        let tag = String::from_utf8(tag).map_err(|_| integrity(section.clone(), "tag is not UTF-8"))?;
        let vector = EmbeddingVector::new(values, tag)
            .map_err(|e| integrity(section.clone(), e.to_string()))?;
        entries.insert(key, CacheEntry { vector, created_at });
        index += 1;
    }
    Ok(entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::local_test_embed;

    #[test]
    fn open_appends_and_reopens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let a = local_test_embed("alpha");
        let b = local_test_embed("beta");
        {
            let cache = EmbeddingCache::open(&path).unwrap();
            cache.insert(cache_key("alpha", "t"), a.clone()).unwrap();
        }
        {
            let cache = EmbeddingCache::open(&path).unwrap();
            assert_eq!(cache.len(), 1);
            cache.insert(cache_key("beta", "t"), b.clone()).unwrap();
        }
        let cache = EmbeddingCache::load(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get(&cache_key("alpha", "t")).unwrap(), a);
        assert_eq!(cache.get(&cache_key("beta", "t")).unwrap(), b);
    }

    #[test]
    fn truncated_tail_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        let cache = EmbeddingCache::in_memory();
        cache.insert(cache_key("x", "t"), local_test_embed("x")).unwrap();
        cache.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 3]).unwrap();
        let err = EmbeddingCache::load(&path).unwrap_err();
        assert!(matches!(err, CacheError::Integrity { ref section, .. } if section.starts_with("entry 0")));
    }

    #[test]
    fn version_bump_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.bin");
        EmbeddingCache::in_memory().save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] += 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            EmbeddingCache::load(&path),
            Err(CacheError::UnsupportedVersion { found: 2 })
        ));
    }

    #[test]
    fn keys_separate_backends() {
        assert_ne!(cache_key("same text", "a"), cache_key("same text", "b"));
        assert_ne!(cache_key("ab", "c"), cache_key("a", "bc"));
    }
}
