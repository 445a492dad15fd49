//! Splitting a sentence into maximal same-label runs.
//!
//! A [`Segment`] is either an entity mention (`B-X I-X*`) or a run of
//! context tokens (all `O`). Only context segments with at least
//! [`DEFAULT_MIN_TOKENS`] tokens are candidates for backtranslation.

use crate::corpus::{Label, LabeledSentence, Token};

pub const DEFAULT_MIN_TOKENS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SegmentKind {
    Mention(String),
    Context,
}

/// Half-open token range `[start, end)` of one segment.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub kind: SegmentKind,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn is_context(&self) -> bool {
        self.kind == SegmentKind::Context
    }

    pub fn tokens<'a>(&self, s: &'a LabeledSentence) -> &'a [Token] {
        &s.tokens()[self.start..self.end]
    }
}

/// The unique maximal partition of `s`. A `B-` label always opens a new
/// segment, so adjacent mentions of the same type stay apart.
pub fn segment(s: &LabeledSentence) -> Vec<Segment> {
    let mut segments: Vec<Segment> = Vec::new();
    for (i, label) in s.labels().iter().enumerate() {
        let extends = match (label, segments.last()) {
            (Label::Outside, Some(last)) => last.is_context(),
            (Label::Inside(_), Some(_)) => true,
            _ => false,
        };
        if extends {
            segments.last_mut().unwrap().end = i + 1;
        } else {
            let kind = match label {
                Label::Outside => SegmentKind::Context,
                Label::Begin(t) | Label::Inside(t) => SegmentKind::Mention(t.clone()),
            };
            segments.push(Segment { start: i, end: i + 1, kind });
        }
    }
    segments
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentPlan {
    pub segments: Vec<Segment>,
    /// Indices into `segments`, ascending.
    pub candidates: Vec<usize>,
}

impl SegmentPlan {
    pub fn candidate_segments(&self) -> impl Iterator<Item = &Segment> {
        self.candidates.iter().map(|&i| &self.segments[i])
    }
}

/// Marks every context segment of at least `min_tokens` tokens as a
/// backtranslation candidate. Mentions are never candidates.
pub fn plan_candidates(segments: Vec<Segment>, min_tokens: usize) -> SegmentPlan {
    let candidates = segments
        .iter()
        .enumerate()
        .filter(|(_, seg)| seg.is_context() && seg.len() >= min_tokens)
        .map(|(i, _)| i)
        .collect();
    SegmentPlan { segments, candidates }
}
