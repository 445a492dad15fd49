use crate::corpus::{Label, LabeledSentence};
use crate::rng::{Probability, RngState};
use crate::segment::{segment, SegmentKind};

use super::MentionDictionary;

/// Mention replacement. Each mention is, with probability `p`, swapped for
/// a different mention of the same type drawn uniformly from `dict`. Types
/// with no alternative keep their mention.
pub fn mention_replace(s: &LabeledSentence, dict: &MentionDictionary, p: Probability, rng: &mut RngState) -> LabeledSentence {
    let mut tokens = Vec::with_capacity(s.len());
    let mut labels = Vec::with_capacity(s.len());
    for seg in segment(s) {
        let original = seg.tokens(s);
        let entity_type = match &seg.kind {
            SegmentKind::Mention(t) if rng.bernoulli(p) => t,
            _ => {
                tokens.extend_from_slice(original);
                labels.extend_from_slice(&s.labels()[seg.start..seg.end]);
                continue;
            }
        };
        // uniform over the list with the original taken out
        let all = dict.get(entity_type);
        let own = dict.position(entity_type, original);
        let n_alternatives = all.len() - usize::from(own.is_some());
        let replacement = if n_alternatives == 0 {
            original
        } else {
            let k = rng.index(n_alternatives);
            match own {
                Some(pos) if k >= pos => all[k + 1].as_slice(),
                _ => all[k].as_slice(),
            }
        };
        for (i, t) in replacement.iter().enumerate() {
            tokens.push(t.clone());
            labels.push(if i == 0 {
                Label::Begin(entity_type.clone())
            } else {
                Label::Inside(entity_type.clone())
            });
        }
    }
    LabeledSentence::from_parts_unchecked(tokens, labels)
}
