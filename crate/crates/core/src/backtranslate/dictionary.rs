//! Offline phrase-table backend.
//!
//! Table lines look like `en-de<TAB>is mixed<TAB>wird gemischt`. Translation
//! scans the whitespace-split input left to right and at each position
//! rewrites the longest phrase known for the language pair; unknown tokens
//! pass through unchanged. An empty table is therefore the identity.

use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use super::backend::{BackendError, TranslationBackend};

#[derive(Debug, Clone, Default)]
struct PairTable {
    phrases: HashMap<Vec<String>, Vec<String>>,
    longest: usize,
}

#[derive(Debug, Clone, Default)]
pub struct PhraseTableBackend {
    pairs: HashMap<(String, String), PairTable>,
}

impl PhraseTableBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds or overwrites one phrase. Both sides are whitespace-normalized.
    pub fn insert(&mut self, source: &str, target: &str, phrase: &str, replacement: &str) {
        let key: Vec<String> = phrase.split_whitespace().map(str::to_string).collect();
        if key.is_empty() {
            return;
        }
        let value = replacement.split_whitespace().map(str::to_string).collect();
        let table = self.pairs.entry((source.to_string(), target.to_string())).or_default();
        table.longest = table.longest.max(key.len());
        table.phrases.insert(key, value);
    }

    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, BackendError> {
        let mut backend = Self::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| BackendError::MalformedTable {
                line: lineno,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(malformed("expected `src-tgt<TAB>phrase<TAB>replacement`"));
            }
            let (source, target) = fields[0]
                .trim()
                .split_once('-')
                .filter(|(s, t)| !s.is_empty() && !t.is_empty())
                .ok_or_else(|| malformed("language pair must look like `en-de`"))?;
            if fields[1].trim().is_empty() {
                return Err(malformed("empty phrase"));
            }
            backend.insert(source, target, fields[1], fields[2]);
        }
        Ok(backend)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, BackendError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    pub fn apply(&self, source: &str, target: &str, text: &str) -> String {
        let tokens: Vec<&str> = text.split_whitespace().collect();
        let Some(table) = self.pairs.get(&(source.to_string(), target.to_string())) else {
            return tokens.join(" ");
        };
        let mut out: Vec<&str> = Vec::with_capacity(tokens.len());
        let mut i = 0;
        let mut key: Vec<String> = Vec::with_capacity(table.longest);
        while i < tokens.len() {
            let max = table.longest.min(tokens.len() - i);
            let found = (1..=max).rev().find_map(|len| {
                key.clear();
                key.extend(tokens[i..i + len].iter().map(|t| t.to_string()));
                table.phrases.get(&key).map(|r| (len, r))
            });
            match found {
                Some((len, replacement)) => {
                    out.extend(replacement.iter().map(String::as_str));
                    i += len;
                }
                None => {
                    out.push(tokens[i]);
                    i += 1;
                }
            }
        }
        out.join(" ")
    }
}

impl TranslationBackend for PhraseTableBackend {
    fn translate(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>, BackendError> {
        Ok(texts.iter().map(|t| self.apply(source, target, t)).collect())
    }

    fn batch_limit(&self) -> usize {
        usize::MAX
    }
}
