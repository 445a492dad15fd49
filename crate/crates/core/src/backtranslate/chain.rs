use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("language chain `{0}` needs a source, at least one intermediate language, and the source again at the end")]
    TooShort(String),
    #[error("language chain `{0}` must end in its source language")]
    NotRoundTrip(String),
    #[error("language chain `{0}` translates a language into itself")]
    RepeatedHop(String),
    #[error("empty language code in chain `{0}`")]
    EmptyCode(String),
}

/// `source → intermediates… → source`, written `en-de-en` (or `en>de>en`
/// when codes themselves contain dashes).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageChain {
    source: String,
    intermediates: Vec<String>,
}

impl LanguageChain {
    pub fn new(source: impl Into<String>, intermediates: Vec<String>) -> Result<Self, ChainError> {
        let chain = LanguageChain {
            source: source.into(),
            intermediates,
        };
        let shown = chain.to_string();
        if chain.intermediates.is_empty() {
            return Err(ChainError::TooShort(shown));
        }
        let path = chain.path();
        if path.iter().any(|c| c.is_empty()) {
            return Err(ChainError::EmptyCode(shown));
        }
        if path.windows(2).any(|w| w[0] == w[1]) {
            return Err(ChainError::RepeatedHop(shown));
        }
        Ok(chain)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn intermediates(&self) -> &[String] {
        &self.intermediates
    }

    /// Every language visited, starting and ending with the source.
    pub fn path(&self) -> Vec<&str> {
        let mut path = vec![self.source.as_str()];
        path.extend(self.intermediates.iter().map(String::as_str));
        path.push(&self.source);
        path
    }

    /// `(from, to)` pairs in the order they are applied.
    pub fn hops(&self) -> Vec<(&str, &str)> {
        self.path().windows(2).map(|w| (w[0], w[1])).collect()
    }
}

impl Default for LanguageChain {
    fn default() -> Self {
        LanguageChain {
            source: "en".into(),
            intermediates: vec!["de".into()],
        }
    }
}

impl FromStr for LanguageChain {
    type Err = ChainError;

    fn from_str(s: &str) -> Result<Self, ChainError> {
        let sep = if s.contains('>') { '>' } else { '-' };
        let codes: Vec<&str> = s.split(sep).map(str::trim).collect();
        if codes.len() < 3 {
            return Err(ChainError::TooShort(s.to_string()));
        }
        if codes[0] != codes[codes.len() - 1] {
            return Err(ChainError::NotRoundTrip(s.to_string()));
        }
        let intermediates = codes[1..codes.len() - 1].iter().map(|c| c.to_string()).collect();
        LanguageChain::new(codes[0], intermediates)
    }
}

impl fmt::Display for LanguageChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sep = if self.path().iter().any(|c| c.contains('-')) { ">" } else { "-" };
        f.write_str(&self.path().join(sep))
    }
}

impl TryFrom<String> for LanguageChain {
    type Error = ChainError;

    fn try_from(s: String) -> Result<Self, ChainError> {
        s.parse()
    }
}

impl From<LanguageChain> for String {
    fn from(c: LanguageChain) -> String {
        c.to_string()
    }
}
