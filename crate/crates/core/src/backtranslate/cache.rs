//! Persistent translation cache.
//!
//! The file is append-only, one JSON object per line:
//! `{"k": "<hex sha256>", "v": "<text>", "t": <unix seconds>}`. On load the
//! last record for a key wins. A damaged final line (an interrupted write)
//! is dropped and the file truncated back to the last good record; damage
//! anywhere else is an error.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::chain::LanguageChain;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache file {path}: line {line} is corrupt")]
    Corrupt { path: PathBuf, line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
struct Record {
    k: String,
    v: String,
    t: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheStats {
    /// Lookups answered from the cache.
    pub hits: u64,
    /// Lookups that had to go to the backend.
    pub misses: u64,
}

impl CacheStats {
    pub fn since(self, earlier: CacheStats) -> CacheStats {
        CacheStats {
            hits: self.hits - earlier.hits,
            misses: self.misses - earlier.misses,
        }
    }
}

#[derive(Debug, Default)]
pub struct TranslationCache {
    entries: RwLock<HashMap<String, String>>,
    log: Option<Mutex<File>>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

/// Collapses runs of whitespace to single spaces and trims the ends.
pub fn normalize(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Cache key for a text sent through a whole chain.
pub fn cache_key(text: &str, chain: &LanguageChain) -> String {
    let mut h = Sha256::new();
    h.update(chain.to_string().as_bytes());
    h.update([0x1f]);
    h.update(normalize(text).as_bytes());
    hex::encode(h.finalize())
}

impl TranslationCache {
    /// A cache that lives only as long as the value.
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Loads `path` (creating it if missing) and appends new entries to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;
        let mut content = Vec::new();
        file.read_to_end(&mut content)?;

        let mut entries = HashMap::new();
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let chunks: Vec<&[u8]> = content.split_inclusive(|b| *b == b'\n').collect();
        for (idx, chunk) in chunks.iter().enumerate() {
            offset += chunk.len();
            if chunk.iter().all(u8::is_ascii_whitespace) {
                good_len = offset;
                continue;
            }
            match serde_json::from_slice::<Record>(chunk) {
                Ok(record) => {
                    entries.insert(record.k, record.v);
                    good_len = offset;
                }
                Err(_) if idx + 1 == chunks.len() => {
                    log::warn!("{}: dropping truncated final record", path.display());
                }
                Err(_) => return Err(CacheError::Corrupt { path, line: idx + 1 }),
            }
        }
        if good_len < content.len() {
            file.set_len(good_len as u64)?;
        }
        if good_len > 0 && content[good_len - 1] != b'\n' {
            file.seek(SeekFrom::End(0))?;
            file.write_all(b"\n")?;
        }
        Ok(TranslationCache {
            entries: RwLock::new(entries),
            log: Some(Mutex::new(file)),
            path: Some(path),
            hits: AtomicU64::new(0),
            misses: AtomicU64::new(0),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.entries.read().unwrap().get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores entries in memory and appends them to the file, if any.
    pub fn insert_many(&self, items: &[(String, String)]) -> Result<(), CacheError> {
        if items.is_empty() {
            return Ok(());
        }
        {
            let mut entries = self.entries.write().unwrap();
            for (k, v) in items {
                entries.insert(k.clone(), v.clone());
            }
        }
        if let Some(log) = &self.log {
            let t = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let mut buf = Vec::new();
            for (k, v) in items {
                let record = Record {
                    k: k.clone(),
                    v: v.clone(),
                    t,
                };
                serde_json::to_writer(&mut buf, &record).expect("records serialize");
                buf.push(b'\n');
            }
            let mut file = log.lock().unwrap();
            file.write_all(&buf)?;
            file.flush()?;
        }
        Ok(())
    }

    pub fn stats(&self) -> CacheStats {
        CacheStats {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn record(&self, hits: u64, misses: u64) {
        self.hits.fetch_add(hits, Ordering::Relaxed);
        self.misses.fetch_add(misses, Ordering::Relaxed);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> LanguageChain {
        "en-de-en".parse().unwrap()
    }

    #[test]
    fn keys_depend_on_chain_and_normalized_text() {
        let c = chain();
        assert_eq!(cache_key("a  b ", &c), cache_key("a b", &c));
        assert_ne!(cache_key("a b", &c), cache_key("a c", &c));
        assert_ne!(cache_key("a b", &c), cache_key("a b", &"en-fr-en".parse().unwrap()));
        assert_eq!(cache_key("a b", &c).len(), 64);
    }

    #[test]
    fn persists_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        {
            let cache = TranslationCache::open(&path).unwrap();
            assert!(cache.is_empty());
            cache.insert_many(&[("k1".into(), "v1".into()), ("k2".into(), "v2".into())]).unwrap();
            cache.insert_many(&[("k1".into(), "v1b".into())]).unwrap();
        }
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("k1").as_deref(), Some("v1b"));
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v["t"].is_u64());
        }
    }

    #[test]
    fn truncated_tail_is_recovered() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "{\"k\":\"a\",\"v\":\"x\",\"t\":1}\n{\"k\":\"b\",\"v\":\"y").unwrap();
        {
            let cache = TranslationCache::open(&path).unwrap();
            assert_eq!(cache.len(), 1);
            cache.insert_many(&[("c".into(), "z".into())]).unwrap();
        }
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.get("a").as_deref(), Some("x"));
        assert_eq!(cache.get("b"), None);
        assert_eq!(cache.get("c").as_deref(), Some("z"));
    }

    #[test]
    fn missing_final_newline_is_repaired() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "{\"k\":\"a\",\"v\":\"x\",\"t\":1}").unwrap();
        TranslationCache::open(&path)
            .unwrap()
            .insert_many(&[("b".into(), "y".into())])
            .unwrap();
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn corruption_in_the_middle_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "garbage\n{\"k\":\"a\",\"v\":\"x\",\"t\":1}\n").unwrap();
        assert!(matches!(TranslationCache::open(&path), Err(CacheError::Corrupt { line: 1, .. })));
    }
}
