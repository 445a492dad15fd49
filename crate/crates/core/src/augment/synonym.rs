use crate::corpus::{Label, LabeledSentence};
use crate::rng::{Probability, RngState};

use super::SynonymLexicon;

/// Synonym replacement. A chosen token with lexicon entries is swapped for
/// one of its synonyms, picked uniformly. A multi-token synonym keeps the
/// original label on its first token; the remaining tokens get `I-X` when
/// the original was `B-X`/`I-X` and `O` otherwise.
pub fn synonym_replace(s: &LabeledSentence, lex: &SynonymLexicon, p: Probability, rng: &mut RngState) -> LabeledSentence {
    let mut tokens = Vec::with_capacity(s.len());
    let mut labels = Vec::with_capacity(s.len());
    for (token, label) in s.iter() {
        let synonyms = lex.get(token.as_str());
        if !rng.bernoulli(p) || synonyms.is_empty() {
            tokens.push(token.clone());
            labels.push(label.clone());
            continue;
        }
        let chosen = &synonyms[rng.index(synonyms.len())];
        let continuation = match label.entity_type() {
            Some(t) => Label::Inside(t.to_string()),
            None => Label::Outside,
        };
        for (i, t) in chosen.iter().enumerate() {
            tokens.push(t.clone());
            labels.push(if i == 0 { label.clone() } else { continuation.clone() });
        }
    }
    LabeledSentence::from_parts_unchecked(tokens, labels)
}
