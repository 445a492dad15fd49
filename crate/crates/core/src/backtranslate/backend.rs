use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dictionary::PhraseTableBackend;
use super::http::{HttpBackend, HttpBackendConfig};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("request timed out")]
    Timeout,
    #[error("HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("backend does not translate {source_lang} -> {target_lang}")]
    Unsupported { source_lang: String, target_lang: String },
    #[error("phrase table line {line}: {reason}")]
    MalformedTable { line: usize, reason: String },
    #[error("backend configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl BackendError {
    /// Whether retrying the same request could succeed.
    pub fn is_transient(&self) -> bool {
        match self {
            BackendError::Timeout | BackendError::Transport(_) => true,
            BackendError::HttpStatus(code) => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}

/// Something that translates batches of text from one language to another.
///
/// Implementations return exactly one output per input, in input order, and
/// an empty batch for an empty batch.
pub trait TranslationBackend: Send + Sync {
    fn translate(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>, BackendError>;

    /// Largest batch a single `translate` call should receive.
    fn batch_limit(&self) -> usize {
        64
    }

    fn supports(&self, _source: &str, _target: &str) -> bool {
        true
    }
}

impl<T: TranslationBackend + ?Sized> TranslationBackend for &T {
    fn translate(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>, BackendError> {
        (**self).translate(source, target, texts)
    }

    fn batch_limit(&self) -> usize {
        (**self).batch_limit()
    }

    fn supports(&self, source: &str, target: &str) -> bool {
        (**self).supports(source, target)
    }
}

impl<T: TranslationBackend + ?Sized> TranslationBackend for Box<T> {
    fn translate(&self, source: &str, target: &str, texts: &[String]) -> Result<Vec<String>, BackendError> {
        (**self).translate(source, target, texts)
    }

    fn batch_limit(&self) -> usize {
        (**self).batch_limit()
    }

    fn supports(&self, source: &str, target: &str) -> bool {
        (**self).supports(source, target)
    }
}

/// Returns every text unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBackend;

impl TranslationBackend for IdentityBackend {
    fn translate(&self, _source: &str, _target: &str, texts: &[String]) -> Result<Vec<String>, BackendError> {
        Ok(texts.to_vec())
    }

    fn batch_limit(&self) -> usize {
        usize::MAX
    }
}

/// Which backend to build; parsed from `identity`, `dict:FILE` or `http:URL`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    #[default]
    Identity,
    #[serde(alias = "dictionary")]
    Dict { table: PathBuf },
    Http(HttpBackendConfig),
}

impl BackendSpec {
    pub fn build(&self) -> Result<Box<dyn TranslationBackend>, BackendError> {
        Ok(match self {
            BackendSpec::Identity => Box::new(IdentityBackend),
            BackendSpec::Dict { table } => Box::new(PhraseTableBackend::from_path(table)?),
            BackendSpec::Http(cfg) => Box::new(HttpBackend::new(cfg.clone())?),
        })
    }
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "identity" {
            Ok(BackendSpec::Identity)
        } else if let Some(path) = s.strip_prefix("dict:") {
            Ok(BackendSpec::Dict { table: path.into() })
        } else if let Some(url) = s.strip_prefix("http:") {
            // `http:http://host/…`; a bare `http://host` also arrives here
            let url = if url.starts_with("//") { format!("http:{url}") } else { url.to_string() };
            Ok(BackendSpec::Http(HttpBackendConfig::new(url)))
        } else if s.starts_with("https://") {
            Ok(BackendSpec::Http(HttpBackendConfig::new(s)))
        } else {
            Err(format!("unknown backend `{s}` (expected identity, dict:FILE or http:URL)"))
        }
    }
}

impl fmt::Display for BackendSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BackendSpec::Identity => f.write_str("identity"),
            BackendSpec::Dict { table } => write!(f, "dict:{}", table.display()),
            BackendSpec::Http(cfg) => write!(f, "http:{}", cfg.endpoint),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_contract() {
        let b = IdentityBackend;
        assert!(b.translate("en", "de", &[]).unwrap().is_empty());
        let texts = vec!["a b".to_string(), "c".to_string()];
        assert_eq!(b.translate("en", "de", &texts).unwrap(), texts);
    }

    #[test]
    fn spec_parsing() {
        assert_eq!("identity".parse::<BackendSpec>().unwrap(), BackendSpec::Identity);
        assert_eq!(
            "dict:table.tsv".parse::<BackendSpec>().unwrap(),
            BackendSpec::Dict { table: "table.tsv".into() }
        );
        for s in ["http:http://localhost:8080", "http://localhost:8080"] {
            match s.parse::<BackendSpec>().unwrap() {
                BackendSpec::Http(cfg) => assert_eq!(cfg.endpoint, "http://localhost:8080"),
                other => panic!("{other:?}"),
            }
        }
        assert!("carrier-pigeon".parse::<BackendSpec>().is_err());
    }

    #[test]
    fn transient_errors() {
        assert!(BackendError::HttpStatus(429).is_transient());
        assert!(BackendError::HttpStatus(503).is_transient());
        assert!(!BackendError::HttpStatus(400).is_transient());
        assert!(!BackendError::MalformedResponse("x".into()).is_transient());
        assert!(BackendError::Timeout.is_transient());
    }
}
