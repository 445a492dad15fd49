//! BIO-labeled corpora in CoNLL-style column format.
//!
//! A corpus is a list of [`LabeledSentence`]s. Every sentence holds one
//! [`Label`] per [`Token`], and the label sequence always satisfies the IOB2
//! rule: an `I-X` label must follow a `B-X` or `I-X` label of the same type.
//!
//! The reader accepts tab- or space-separated columns. The first column is the
//! token and the last column is the label. Any columns in between are ignored,
//! so both 2-column and 4-column CoNLL files load without configuration.
//! Lines beginning with `-DOCSTART-` are skipped. Blank lines end sentences.
//!
//! ```
//! use ner_augment::corpus::{parse_conll_str, write_conll_string, ParseOptions};
//!
//! let corpus = parse_conll_str("EU\tB-ORG\nrejects\tO\n\n", &ParseOptions::default()).unwrap();
//! assert_eq!(corpus.len(), 1);
//! assert_eq!(write_conll_string(&corpus), "EU\tB-ORG\nrejects\tO\n\n");
//! ```

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: expected at least 2 columns, found {found}")]
    MalformedLine { line: usize, found: usize },
    #[error("line {line}: invalid label `{label}`")]
    InvalidLabel { line: usize, label: String },
    /// `sentence` is the 1-based ordinal of the sentence in the input.
    #[error("sentence {sentence} (line {line}): `{label}` does not continue an entity of the same type")]
    InvalidTransition {
        sentence: usize,
        line: usize,
        label: String,
    },
    #[error("invalid token {token:?}: tokens must be non-empty and contain no whitespace")]
    InvalidToken { token: String },
    #[error("{tokens} tokens but {labels} labels")]
    LengthMismatch { tokens: usize, labels: usize },
    #[error("a sentence needs at least one token")]
    EmptySentence,
    #[error("label at position {position} (`{label}`) breaks the IOB2 rule")]
    InvalidSequence { position: usize, label: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A single whitespace-free token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidToken { token: text });
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Token {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Token::new(value)
    }
}

impl From<Token> for String {
    fn from(t: Token) -> String {
        t.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// One BIO label. `Outside` carries no entity type, `Begin` and `Inside` always do.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Outside,
    Begin(String),
    Inside(String),
}

impl Label {
    pub fn entity_type(&self) -> Option<&str> {
        match self {
            Label::Outside => None,
            Label::Begin(t) | Label::Inside(t) => Some(t),
        }
    }

    pub fn is_outside(&self) -> bool {
        matches!(self, Label::Outside)
    }

    /// Whether `self` may directly follow `prev` (`None` = sentence start).
    pub fn may_follow(&self, prev: Option<&Label>) -> bool {
        match self {
            Label::Inside(t) => matches!(prev, Some(Label::Begin(p) | Label::Inside(p)) if p == t),
            _ => true,
        }
    }
}

impl FromStr for Label {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "O" {
            return Ok(Label::Outside);
        }
        let valid_type = |t: &str| !t.is_empty() && !t.chars().any(char::is_whitespace);
        if let Some(t) = s.strip_prefix("B-") {
            if valid_type(t) {
                return Ok(Label::Begin(t.to_string()));
            }
        }
        if let Some(t) = s.strip_prefix("I-") {
            if valid_type(t) {
                return Ok(Label::Inside(t.to_string()));
            }
        }
        Err(())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Outside => f.write_str("O"),
            Label::Begin(t) => write!(f, "B-{t}"),
            Label::Inside(t) => write!(f, "I-{t}"),
        }
    }
}

/// Returns the index of the first label that breaks the IOB2 rule, if any.
pub fn first_iob2_violation(labels: &[Label]) -> Option<usize> {
    let mut prev = None;
    for (i, label) in labels.iter().enumerate() {
        if !label.may_follow(prev) {
            return Some(i);
        }
        prev = Some(label);
    }
    None
}

pub fn is_iob2_valid(labels: &[Label]) -> bool {
    first_iob2_violation(labels).is_none()
}

/// Tokens paired with IOB2-valid labels. Always non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabeledSentence {
    tokens: Vec<Token>,
    labels: Vec<Label>,
}

impl LabeledSentence {
    pub fn new(tokens: Vec<Token>, labels: Vec<Label>) -> Result<Self, CorpusError> {
        if tokens.len() != labels.len() {
            return Err(CorpusError::LengthMismatch {
                tokens: tokens.len(),
                labels: labels.len(),
            });
        }
        if tokens.is_empty() {
            return Err(CorpusError::EmptySentence);
        }
        if let Some(position) = first_iob2_violation(&labels) {
            return Err(CorpusError::InvalidSequence {
                position,
                label: labels[position].to_string(),
            });
        }
        Ok(LabeledSentence { tokens, labels })
    }

    /// Builds a sentence from `(token, label)` string pairs.
    pub fn from_pairs<T: AsRef<str>, L: AsRef<str>>(pairs: &[(T, L)]) -> Result<Self, CorpusError> {
        let mut tokens = Vec::with_capacity(pairs.len());
        let mut labels = Vec::with_capacity(pairs.len());
        for (t, l) in pairs {
            tokens.push(Token::new(t.as_ref())?);
            let l = l.as_ref();
            labels.push(l.parse().map_err(|_| CorpusError::InvalidLabel {
                line: 0,
                label: l.to_string(),
            })?);
        }
        Self::new(tokens, labels)
    }

    /// Augmenters construct their output through here; they preserve the
    /// invariants by construction.
    pub(crate) fn from_parts_unchecked(tokens: Vec<Token>, labels: Vec<Label>) -> Self {
        debug_assert_eq!(tokens.len(), labels.len());
        debug_assert!(!tokens.is_empty());
        debug_assert!(is_iob2_valid(&labels), "augmenter produced invalid IOB2: {labels:?}");
        LabeledSentence { tokens, labels }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Token, &Label)> {
        self.tokens.iter().zip(&self.labels)
    }

    /// Tokens joined by single spaces.
    pub fn text(&self) -> String {
        join_tokens(&self.tokens)
    }
}

pub(crate) fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_str());
    }
    out
}

/// An ordered list of sentences. The set of entity types is derived on demand.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    sentences: Vec<LabeledSentence>,
}

impl Corpus {
    pub fn new(sentences: Vec<LabeledSentence>) -> Self {
        Corpus { sentences }
    }

    pub fn sentences(&self) -> &[LabeledSentence] {
        &self.sentences
    }

    pub fn into_sentences(self) -> Vec<LabeledSentence> {
        self.sentences
    }

    pub fn push(&mut self, sentence: LabeledSentence) {
        self.sentences.push(sentence);
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, LabeledSentence> {
        self.sentences.iter()
    }

    pub fn entity_types(&self) -> BTreeSet<&str> {
        self.sentences
            .iter()
            .flat_map(|s| s.labels.iter().filter_map(Label::entity_type))
            .collect()
    }
}

impl FromIterator<LabeledSentence> for Corpus {
    fn from_iter<I: IntoIterator<Item = LabeledSentence>>(iter: I) -> Self {
        Corpus::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a LabeledSentence;
    type IntoIter = std::slice::Iter<'a, LabeledSentence>;

    fn into_iter(self) -> Self::IntoIter {
        self.sentences.iter()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ColumnSeparator {
    /// Any run of spaces or tabs.
    #[default]
    Whitespace,
    /// Tabs only; spaces inside a column make the token invalid.
    Tab,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    pub separator: ColumnSeparator,
    /// Rewrite an `I-X` without a valid predecessor to `B-X` instead of failing.
    pub repair_iob: bool,
}

/// Everything the reader found in one pass over the input.
#[derive(Debug, Default)]
pub struct Validation {
    /// Sentences that parsed, with IOB2 repairs applied. Sentences that hit a
    /// line-level error are left out.
    pub corpus: Corpus,
    /// Every problem found, in input order. Transition problems are listed
    /// here even though the corpus above already carries their repair.
    pub issues: Vec<CorpusError>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    /// True when every issue is an IOB2 transition that the repair rule fixes.
    pub fn is_repairable(&self) -> bool {
        self.issues
            .iter()
            .all(|e| matches!(e, CorpusError::InvalidTransition { .. }))
    }
}

/// Reads the whole input and collects every problem instead of stopping at
/// the first one. Only I/O errors abort.
pub fn validate_conll<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<Validation, CorpusError> {
    let mut out = Validation::default();
    let mut tokens = Vec::new();
    let mut labels: Vec<Label> = Vec::new();
    let mut broken = false;
    let mut ordinal = 0usize;

    fn flush(tokens: &mut Vec<Token>, labels: &mut Vec<Label>, broken: &mut bool, out: &mut Validation) {
        if !tokens.is_empty() && !*broken {
            out.corpus.sentences.push(LabeledSentence {
                tokens: std::mem::take(tokens),
                labels: std::mem::take(labels),
            });
        }
        tokens.clear();
        labels.clear();
        *broken = false;
    }

    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            flush(&mut tokens, &mut labels, &mut broken, &mut out);
            continue;
        }
        if trimmed.starts_with("-DOCSTART-") {
            continue;
        }
        if tokens.is_empty() && labels.is_empty() && !broken {
            ordinal += 1;
        }
        let columns: Vec<&str> = match opts.separator {
            ColumnSeparator::Whitespace => trimmed.split_whitespace().collect(),
            ColumnSeparator::Tab => trimmed.split('\t').map(str::trim).collect(),
        };
        if columns.len() < 2 {
            out.issues.push(CorpusError::MalformedLine {
                line: lineno,
                found: columns.len(),
            });
            broken = true;
            continue;
        }
        let token = match Token::new(columns[0]) {
            Ok(t) => t,
            Err(e) => {
                out.issues.push(e);
                broken = true;
                continue;
            }
        };
        let raw_label = columns[columns.len() - 1];
        let mut label: Label = match raw_label.parse() {
            Ok(l) => l,
            Err(()) => {
                out.issues.push(CorpusError::InvalidLabel {
                    line: lineno,
                    label: raw_label.to_string(),
                });
                broken = true;
                continue;
            }
        };
        if !label.may_follow(labels.last()) {
            out.issues.push(CorpusError::InvalidTransition {
                sentence: ordinal,
                line: lineno,
                label: raw_label.to_string(),
            });
            if let Label::Inside(t) = label {
                label = Label::Begin(t);
            }
        }
        tokens.push(token);
        labels.push(label);
    }
    flush(&mut tokens, &mut labels, &mut broken, &mut out);
    Ok(out)
}

/// Parses a CoNLL-style stream. Fails on the first problem, except that IOB2
/// transition problems are repaired when `opts.repair_iob` is set.
pub fn parse_conll<R: BufRead>(reader: R, opts: &ParseOptions) -> Result<Corpus, CorpusError> {
    let validation = validate_conll(reader, opts)?;
    let fatal = validation
        .issues
        .into_iter()
        .find(|e| !(opts.repair_iob && matches!(e, CorpusError::InvalidTransition { .. })));
    match fatal {
        Some(e) => Err(e),
        None => Ok(validation.corpus),
    }
}

pub fn parse_conll_str(input: &str, opts: &ParseOptions) -> Result<Corpus, CorpusError> {
    parse_conll(input.as_bytes(), opts)
}

/// Writes `token<TAB>label` lines with a blank line after each sentence.
pub fn write_conll<W: Write>(corpus: &Corpus, mut w: W) -> io::Result<()> {
    for sentence in corpus {
        for (token, label) in sentence.iter() {
            writeln!(w, "{token}\t{label}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_conll_string(corpus: &Corpus) -> String {
    let mut buf = Vec::new();
    write_conll(corpus, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("tokens and labels are UTF-8")
}

/// An entity mention: a maximal `B-X (I-X)*` run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mention {
    pub tokens: Vec<Token>,
    pub entity_type: String,
}

impl Mention {
    pub fn surface(&self) -> String {
        join_tokens(&self.tokens)
    }
}

/// Mentions in left-to-right order.
pub fn extract_mentions(s: &LabeledSentence) -> Vec<Mention> {
    let mut mentions: Vec<Mention> = Vec::new();
    for (token, label) in s.iter() {
        match label {
            Label::Begin(t) => mentions.push(Mention {
                tokens: vec![token.clone()],
                entity_type: t.clone(),
            }),
            Label::Inside(_) => mentions
                .last_mut()
                .expect("IOB2 guarantees a preceding B-")
                .tokens
                .push(token.clone()),
            Label::Outside => {}
        }
    }
    mentions
}

/// Descriptive counts for a corpus. Mentions count as the same when their
/// tokens, joined by single spaces, are byte-identical.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_sentences: usize,
    pub n_tokens: usize,
    pub n_mentions: usize,
    pub n_unique_mentions: usize,
    pub n_entity_types: usize,
}

pub fn compute_stats(c: &Corpus) -> CorpusStats {
    let mut surfaces = HashSet::new();
    let mut n_mentions = 0;
    for s in c {
        for m in extract_mentions(s) {
            n_mentions += 1;
            surfaces.insert(m.surface());
        }
    }
    CorpusStats {
        n_sentences: c.len(),
        n_tokens: c.iter().map(LabeledSentence::len).sum(),
        n_mentions,
        n_unique_mentions: surfaces.len(),
        n_entity_types: c.entity_types().len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(input: &str) -> Result<Corpus, CorpusError> {
        parse_conll_str(input, &ParseOptions::default())
    }

    #[test]
    fn minimal_input() {
        let c = parse("EU\tB-ORG\nrejects\tO\n\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.sentences()[0].len(), 2);
        assert_eq!(extract_mentions(&c.sentences()[0]).len(), 1);
    }

    #[test]
    fn leading_inside_is_fatal_without_repair() {
        let err = parse("word\tI-ORG\n\n").unwrap_err();
        assert!(matches!(err, CorpusError::InvalidTransition { sentence: 1, line: 1, .. }));
    }

    #[test]
    fn repair_rewrites_orphan_inside() {
        let opts = ParseOptions {
            repair_iob: true,
            ..Default::default()
        };
        let c = parse_conll_str("a\tO\nb\tI-ORG\nc\tI-ORG\nd\tI-LOC\n\n", &opts).unwrap();
        let labels: Vec<String> = c.sentences()[0].labels().iter().map(ToString::to_string).collect();
        assert_eq!(labels, ["O", "B-ORG", "I-ORG", "B-LOC"]);
    }

    #[test]
    fn type_change_inside_is_a_violation() {
        assert!(parse("a\tB-ORG\nb\tI-LOC\n\n").is_err());
    }

    #[test]
    fn docstart_and_extra_blank_lines() {
        let c = parse("-DOCSTART- -X- O O\n\n\nEU NNP B-NP B-ORG\nrejects VBZ B-VP O\n\n\n\n").unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.sentences()[0].tokens()[1].as_str(), "rejects");
        assert_eq!(c.sentences()[0].labels()[0], Label::Begin("ORG".into()));
    }

    #[test]
    fn missing_trailing_blank_line() {
        let c = parse("a\tO\n\nb\tO").unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse("a\tO\nlonely\n\n").unwrap_err();
        assert!(matches!(err, CorpusError::MalformedLine { line: 2, found: 1 }));
    }

    #[test]
    fn invalid_labels() {
        for bad in ["B-", "X-ORG", "o", "I", "B_ORG"] {
            let err = parse(&format!("a\t{bad}\n\n")).unwrap_err();
            assert!(matches!(err, CorpusError::InvalidLabel { line: 1, .. }), "{bad}");
        }
    }

    #[test]
    fn tab_mode_rejects_spaces_inside_tokens() {
        let opts = ParseOptions {
            separator: ColumnSeparator::Tab,
            ..Default::default()
        };
        assert!(parse_conll_str("New York\tB-LOC\n\n", &opts).is_err());
        assert_eq!(parse_conll_str("York\tB-LOC\n\n", &opts).unwrap().len(), 1);
    }

    #[test]
    fn validation_collects_every_issue() {
        let v = validate_conll(
            "a\tI-X\n\nb\tO\nc\tI-Y\n\nd\n\ne\tB-Z\n\n".as_bytes(),
            &ParseOptions::default(),
        )
        .unwrap();
        assert_eq!(v.issues.len(), 3);
        assert!(!v.is_repairable());
        // sentences 1, 2 and 4 survive; 3 had a malformed line
        assert_eq!(v.corpus.len(), 3);
        match &v.issues[1] {
            CorpusError::InvalidTransition { sentence, line, .. } => assert_eq!((*sentence, *line), (2, 4)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn write_single_sentence() {
        let c = Corpus::new(vec![LabeledSentence::from_pairs(&[("a", "O")]).unwrap()]);
        assert_eq!(write_conll_string(&c), "a\tO\n\n");
    }

    #[test]
    fn labels_written_verbatim() {
        let input = "Stir\tB-operation\nthe\tO\nTiO2\tB-material\npowder\tI-material\n\n";
        let c = parse(input).unwrap();
        assert_eq!(write_conll_string(&c), input);
    }

    #[test]
    fn mentions_in_order() {
        let s = LabeledSentence::from_pairs(&[("New", "B-ORG"), ("York", "I-ORG"), ("wins", "O")]).unwrap();
        let m = extract_mentions(&s);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].surface(), "New York");
        assert_eq!(m[0].entity_type, "ORG");

        let all_o = LabeledSentence::from_pairs(&[("a", "O"), ("b", "O")]).unwrap();
        assert!(extract_mentions(&all_o).is_empty());
    }

    #[test]
    fn stats_counts() {
        let c = parse(
            "Acme\tB-ORG\nhired\tO\nBob\tB-PER\n\nBob\tB-PER\nleft\tO\nAcme\tB-ORG\nCorp\tI-ORG\n\n",
        )
        .unwrap();
        assert_eq!(
            compute_stats(&c),
            CorpusStats {
                n_sentences: 2,
                n_tokens: 7,
                n_mentions: 4,
                n_unique_mentions: 3,
                n_entity_types: 2,
            }
        );
        assert_eq!(compute_stats(&Corpus::default()), CorpusStats::default());
    }

    #[test]
    fn unique_mentions_are_case_sensitive() {
        let c = parse("acme\tB-ORG\n\nAcme\tB-ORG\n\n").unwrap();
        assert_eq!(compute_stats(&c).n_unique_mentions, 2);
    }

    #[test]
    fn sentence_constructor_checks_invariants() {
        assert!(matches!(
            LabeledSentence::new(vec![], vec![]),
            Err(CorpusError::EmptySentence)
        ));
        assert!(matches!(
            LabeledSentence::new(vec![Token::new("a").unwrap()], vec![]),
            Err(CorpusError::LengthMismatch { .. })
        ));
        assert!(Token::new("a b").is_err());
        assert!(Token::new("").is_err());
    }
}
