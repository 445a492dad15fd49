//! Lookup tables the rule-based augmenters draw replacements from.

use std::collections::{BTreeMap, HashMap};
use std::io::BufRead;
use std::path::Path;

use thiserror::Error;

use crate::corpus::{extract_mentions, Corpus, Label, Token};

/// Every token seen with each full label, with repetitions. Sampling from an
/// entry is therefore frequency-weighted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelVocabulary {
    entries: BTreeMap<Label, Vec<Token>>,
}

impl LabelVocabulary {
    pub fn get(&self, label: &Label) -> &[Token] {
        self.entries.get(label).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn insert(&mut self, label: Label, token: Token) {
        self.entries.entry(label).or_default().push(token);
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.entries.keys()
    }
}

pub fn build_label_vocabulary(c: &Corpus) -> LabelVocabulary {
    let mut vocab = LabelVocabulary::default();
    for s in c {
        for (token, label) in s.iter() {
            vocab.insert(label.clone(), token.clone());
        }
    }
    vocab
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct TypeMentions {
    list: Vec<Vec<Token>>,
    index: HashMap<Vec<Token>, usize>,
}

/// Distinct mention surfaces per entity type, in first-seen order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MentionDictionary {
    entries: BTreeMap<String, TypeMentions>,
}

impl MentionDictionary {
    pub fn get(&self, entity_type: &str) -> &[Vec<Token>] {
        self.entries.get(entity_type).map(|e| e.list.as_slice()).unwrap_or(&[])
    }

    /// Index of `tokens` in [`get`](Self::get)`(entity_type)`.
    pub fn position(&self, entity_type: &str, tokens: &[Token]) -> Option<usize> {
        self.entries.get(entity_type)?.index.get(tokens).copied()
    }

    /// Adds a mention unless the same surface is already listed for the type.
    pub fn insert(&mut self, entity_type: &str, tokens: Vec<Token>) {
        let entry = self.entries.entry(entity_type.to_string()).or_default();
        if !entry.index.contains_key(&tokens) {
            entry.index.insert(tokens.clone(), entry.list.len());
            entry.list.push(tokens);
        }
    }

    pub fn entity_types(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn build_mention_dictionary(c: &Corpus) -> MentionDictionary {
    let mut dict = MentionDictionary::default();
    for s in c {
        for m in extract_mentions(s) {
            dict.insert(&m.entity_type, m.tokens);
        }
    }
    dict
}

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("lexicon line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Synonyms keyed by lowercased token. Each synonym is one or more tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymLexicon {
    entries: BTreeMap<String, Vec<Vec<Token>>>,
}

impl SynonymLexicon {
    /// Adds synonyms for `key`. Synonyms equal to the key itself and
    /// duplicates are dropped; an entry that ends up empty is not stored.
    pub fn insert(&mut self, key: &str, synonyms: impl IntoIterator<Item = Vec<Token>>) {
        let key = key.to_lowercase();
        let list = self.entries.entry(key.clone()).or_default();
        for syn in synonyms {
            if syn.is_empty() || (syn.len() == 1 && syn[0].as_str().to_lowercase() == key) {
                continue;
            }
            if !list.contains(&syn) {
                list.push(syn);
            }
        }
        if list.is_empty() {
            self.entries.remove(&key);
        }
    }

    /// Synonyms of `token`, looked up case-insensitively.
    pub fn get(&self, token: &str) -> &[Vec<Token>] {
        self.entries
            .get(&token.to_lowercase())
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `key<TAB>syn1|syn2|...` lines. Multi-token synonyms separate
    /// their tokens with single spaces. `#` starts a comment line.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, LexiconError> {
        let mut lex = SynonymLexicon::default();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, rest) = line.split_once('\t').ok_or_else(|| LexiconError::Malformed {
                line: lineno,
                reason: "expected `key<TAB>synonyms`".into(),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(LexiconError::Malformed {
                    line: lineno,
                    reason: format!("invalid key {key:?}"),
                });
            }
            let mut synonyms = Vec::new();
            for alt in rest.split('|') {
                let tokens: Vec<Token> = alt
                    .split_whitespace()
                    .map(|t| Token::new(t).expect("split_whitespace yields valid tokens"))
                    .collect();
                if !tokens.is_empty() {
                    synonyms.push(tokens);
                }
            }
            lex.insert(key, synonyms);
        }
        Ok(lex)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conll_str, ParseOptions};

    fn corpus(s: &str) -> Corpus {
        parse_conll_str(s, &ParseOptions::default()).unwrap()
    }

    fn tok(s: &str) -> Token {
        Token::new(s).unwrap()
    }

    #[test]
    fn vocabulary_by_full_label() {
        let v = build_label_vocabulary(&corpus("a\tO\nb\tO\n\n"));
        assert_eq!(v.get(&Label::Outside), &[tok("a"), tok("b")]);

        let v = build_label_vocabulary(&corpus("New\tB-LOC\nYork\tI-LOC\nYork\tB-LOC\n\n"));
        assert_eq!(v.get(&Label::Begin("LOC".into())), &[tok("New"), tok("York")]);
        assert_eq!(v.get(&Label::Inside("LOC".into())), &[tok("York")]);
        assert!(v.get(&Label::Outside).is_empty());
    }

    #[test]
    fn dictionary_single_mention() {
        let d = build_mention_dictionary(&corpus("Acme\tB-ORG\nwins\tO\n\n"));
        assert_eq!(d.len(), 1);
        assert_eq!(d.get("ORG"), &[vec![tok("Acme")]]);
    }

    #[test]
    fn dictionary_dedups_surfaces() {
        let d = build_mention_dictionary(&corpus("Acme\tB-ORG\n\nAcme\tB-ORG\n\nInitech\tB-ORG\n\n"));
        assert_eq!(d.get("ORG"), &[vec![tok("Acme")], vec![tok("Initech")]]);
    }

    #[test]
    fn lexicon_file() {
        let text = "# comment\nbig\tlarge|huge|Big\nNYC\tNew York\n\nstir\tstir\n";
        let lex = SynonymLexicon::from_reader(text.as_bytes()).unwrap();
        assert_eq!(lex.get("BIG"), &[vec![tok("large")], vec![tok("huge")]]);
        assert_eq!(lex.get("nyc"), &[vec![tok("New"), tok("York")]]);
        // only the key itself was listed
        assert!(lex.get("stir").is_empty());
        assert_eq!(lex.len(), 2);
    }

    #[test]
    fn lexicon_requires_tab() {
        let err = SynonymLexicon::from_reader("big large\n".as_bytes()).unwrap_err();
        assert!(matches!(err, LexiconError::Malformed { line: 1, .. }));
    }
}
