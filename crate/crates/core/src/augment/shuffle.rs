use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Label, LabeledSentence};
use crate::rng::{Probability, RngState};
use crate::segment::{segment, Segment, SegmentKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShuffleMode {
    /// Each segment, with probability p, has its tokens permuted in place.
    #[default]
    WithinSegments,
    /// With probability p, the segments of the sentence are put in a random
    /// order; each segment stays intact.
    SegmentOrder,
}

impl fmt::Display for ShuffleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShuffleMode::WithinSegments => "within-segments",
            ShuffleMode::SegmentOrder => "segment-order",
        })
    }
}

impl FromStr for ShuffleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "within-segments" => Ok(ShuffleMode::WithinSegments),
            "segment-order" => Ok(ShuffleMode::SegmentOrder),
            other => Err(format!("unknown shuffle mode `{other}` (expected within-segments or segment-order)")),
        }
    }
}

fn segment_labels(seg: &Segment) -> impl Iterator<Item = Label> + '_ {
    (0..seg.len()).map(move |i| match &seg.kind {
        SegmentKind::Context => Label::Outside,
        SegmentKind::Mention(t) if i == 0 => Label::Begin(t.clone()),
        SegmentKind::Mention(t) => Label::Inside(t.clone()),
    })
}

/// Shuffle within segments (or of segment order, see [`ShuffleMode`]).
/// Mention labels are re-assigned positionally so the result is IOB2-valid.
pub fn shuffle_within_segments(s: &LabeledSentence, p: Probability, rng: &mut RngState, mode: ShuffleMode) -> LabeledSentence {
    let mut segments = segment(s);
    let mut tokens = Vec::with_capacity(s.len());
    let mut labels = Vec::with_capacity(s.len());
    match mode {
        ShuffleMode::WithinSegments => {
            for seg in &segments {
                let mut seg_tokens = seg.tokens(s).to_vec();
                if rng.bernoulli(p) {
                    rng.shuffle(&mut seg_tokens);
                }
                tokens.extend(seg_tokens);
                labels.extend(segment_labels(seg));
            }
        }
        ShuffleMode::SegmentOrder => {
            if rng.bernoulli(p) {
                rng.shuffle(&mut segments);
            }
            for seg in &segments {
                tokens.extend_from_slice(seg.tokens(s));
                labels.extend(segment_labels(seg));
            }
        }
    }
    LabeledSentence::from_parts_unchecked(tokens, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::test_support::valid_sentence;
    use crate::corpus::{extract_mentions, is_iob2_valid, Token};
    use proptest::prelude::*;

    fn sent(pairs: &[(&str, &str)]) -> LabeledSentence {
        LabeledSentence::from_pairs(pairs).unwrap()
    }

    #[test]
    fn zero_probability_is_identity() {
        let s = sent(&[("a", "O"), ("b", "O"), ("X", "B-T"), ("Y", "I-T"), ("c", "O")]);
        for mode in [ShuffleMode::WithinSegments, ShuffleMode::SegmentOrder] {
            assert_eq!(shuffle_within_segments(&s, Probability::ZERO, &mut RngState::from_seed(4), mode), s);
        }
    }

    #[test]
    fn single_token_segments_are_fixed_points() {
        let s = sent(&[("a", "O"), ("X", "B-T"), ("b", "O"), ("Y", "B-U"), ("Z", "B-U")]);
        for seed in 0..20 {
            let out = shuffle_within_segments(&s, Probability::ONE, &mut RngState::from_seed(seed), ShuffleMode::WithinSegments);
            assert_eq!(out, s);
        }
    }

    #[test]
    fn segment_order_keeps_segments_whole() {
        let s = sent(&[("a", "O"), ("b", "O"), ("X", "B-T"), ("Y", "I-T"), ("c", "O")]);
        let mut seen_change = false;
        for seed in 0..20 {
            let out = shuffle_within_segments(&s, Probability::ONE, &mut RngState::from_seed(seed), ShuffleMode::SegmentOrder);
            assert!(is_iob2_valid(out.labels()));
            let m = extract_mentions(&out);
            assert_eq!(m.len(), 1);
            assert_eq!(m[0].surface(), "X Y");
            seen_change |= out != s;
        }
        assert!(seen_change);
    }

    #[test]
    fn modes_parse() {
        assert_eq!("segment-order".parse::<ShuffleMode>().unwrap(), ShuffleMode::SegmentOrder);
        assert!("sideways".parse::<ShuffleMode>().is_err());
    }

    proptest! {
        // Oracle: per segment, the sorted (token, is-mention) pairs are equal
        // before and after; segment boundaries do not move.
        #[test]
        fn within_segments_preserves_segment_multisets(s in valid_sentence(), p in 0.0f64..=1.0, seed: u64) {
            let out = shuffle_within_segments(&s, Probability::new(p).unwrap(), &mut RngState::from_seed(seed), ShuffleMode::WithinSegments);
            prop_assert!(is_iob2_valid(out.labels()));
            let before = segment(&s);
            let after = segment(&out);
            prop_assert_eq!(&before, &after);
            for seg in &before {
                let bag = |x: &LabeledSentence| {
                    let mut v: Vec<(Token, bool)> = x.tokens()[seg.start..seg.end]
                        .iter()
                        .map(|t| (t.clone(), !seg.is_context()))
                        .collect();
                    v.sort();
                    v
                };
                prop_assert_eq!(bag(&s), bag(&out));
            }
            prop_assert_eq!(extract_mentions(&out).len(), extract_mentions(&s).len());
        }

        #[test]
        fn segment_order_is_valid(s in valid_sentence(), p in 0.0f64..=1.0, seed: u64) {
            let out = shuffle_within_segments(&s, Probability::new(p).unwrap(), &mut RngState::from_seed(seed), ShuffleMode::SegmentOrder);
            prop_assert!(is_iob2_valid(out.labels()));
            prop_assert_eq!(out.len(), s.len());
        }
    }
}
