use crate::corpus::LabeledSentence;
use crate::rng::{Probability, RngState};

use super::{Augmented, LabelVocabulary, Warning};

/// Label-wise token replacement: each token is, with probability `p`,
/// replaced by a token drawn uniformly from those seen with the same label.
/// Labels are never touched.
pub fn lwtr(s: &LabeledSentence, vocab: &LabelVocabulary, p: Probability, rng: &mut RngState) -> Augmented {
    let mut tokens = s.tokens().to_vec();
    let mut warnings = Vec::new();
    for (token, label) in tokens.iter_mut().zip(s.labels()) {
        if !rng.bernoulli(p) {
            continue;
        }
        let pool = vocab.get(label);
        if pool.is_empty() {
            warnings.push(Warning::MissingLabelVocab {
                label: label.to_string(),
            });
            continue;
        }
        *token = pool[rng.index(pool.len())].clone();
    }
    Augmented {
        sentence: LabeledSentence::from_parts_unchecked(tokens, s.labels().to_vec()),
        warnings,
    }
}
