//! Backtranslation of the context around entity mentions.
//!
//! A sentence is split into segments (see [`crate::segment`]). Context
//! segments with at least `min_tokens` tokens are candidates; each candidate
//! is selected independently with probability `p`. Selected segments are
//! joined with single spaces, sent through the language chain
//! (`en → de → en` by default), split back on whitespace, and spliced into
//! the sentence with all-`O` labels. Mention segments are copied byte for
//! byte, so the label sequence stays valid and the entities are unchanged.

mod backend;
mod cache;
mod chain;
mod dictionary;
mod http;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{Augmented, Warning};
use crate::corpus::{join_tokens, Corpus, Label, LabeledSentence, Token};
use crate::pipeline::{assemble, AugmentOutcome, RunCounters};
use crate::rng::{Probability, RngState};
use crate::segment::{plan_candidates, segment, SegmentPlan, DEFAULT_MIN_TOKENS};

pub use backend::{BackendError, BackendSpec, IdentityBackend, TranslationBackend};
pub use cache::{cache_key, normalize, CacheError, CacheStats, TranslationCache};
pub use chain::{ChainError, LanguageChain};
pub use dictionary::PhraseTableBackend;
pub use http::{HttpBackend, HttpBackendConfig, DEFAULT_AUTH_ENV};

#[derive(Debug, Error)]
pub enum BacktranslateError {
    #[error("translation backend unavailable ({source_lang} -> {target_lang}): {error}")]
    BackendUnavailable {
        source_lang: String,
        target_lang: String,
        #[source]
        error: BackendError,
    },
    #[error("backend cannot translate {source_lang} -> {target_lang}")]
    UnsupportedHop { source_lang: String, target_lang: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("invalid backtranslation config: {0}")]
    InvalidConfig(String),
}

impl BacktranslateError {
    /// The backend error behind a `BackendUnavailable`, if that is what this is.
    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            BacktranslateError::BackendUnavailable { error, .. } => Some(error),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktranslationConfig {
    /// Probability of backtranslating each candidate segment.
    pub p: Probability,
    pub min_tokens: usize,
    pub chain: LanguageChain,
    /// Augmentations requested per sentence.
    pub multiplicity: usize,
    /// How many times an augmentation identical to its source is redrawn
    /// before it is dropped.
    pub retry_budget: usize,
}

impl Default for BacktranslationConfig {
    fn default() -> Self {
        BacktranslationConfig {
            p: Probability::new(0.5).unwrap(),
            min_tokens: DEFAULT_MIN_TOKENS,
            chain: LanguageChain::default(),
            multiplicity: 1,
            retry_budget: 3,
        }
    }
}

impl BacktranslationConfig {
    pub fn validate(&self) -> Result<(), BacktranslateError> {
        if self.multiplicity == 0 {
            return Err(BacktranslateError::InvalidConfig("multiplicity must be at least 1".into()));
        }
        if self.min_tokens == 0 {
            return Err(BacktranslateError::InvalidConfig("min_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

fn translate_hop(
    backend: &dyn TranslationBackend,
    source: &str,
    target: &str,
    texts: &[String],
) -> Result<Vec<String>, BacktranslateError> {
    let unavailable = |error| BacktranslateError::BackendUnavailable {
        source_lang: source.to_string(),
        target_lang: target.to_string(),
        error,
    };
    let limit = backend.batch_limit().max(1);
    let chunks: Vec<Vec<String>> = texts
        .par_chunks(limit)
        .map(|chunk| {
            let out = backend.translate(source, target, chunk).map_err(unavailable)?;
            if out.len() != chunk.len() {
                return Err(unavailable(BackendError::MalformedResponse(format!(
                    "sent {} texts, got {} back",
                    chunk.len(),
                    out.len()
                ))));
            }
            Ok(out)
        })
        .collect::<Result<_, _>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Sends `texts` through every hop of `chain`, in order.
///
/// Identical texts (after whitespace normalization) are translated once.
/// Texts already in `cache` skip the backend; new results are written to it.
/// Batches larger than the backend's limit are split and sent concurrently.
pub fn translate_chain(
    texts: &[String],
    chain: &LanguageChain,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
) -> Result<Vec<String>, BacktranslateError> {
    if texts.is_empty() {
        return Ok(Vec::new());
    }
    for (source, target) in chain.hops() {
        if !backend.supports(source, target) {
            return Err(BacktranslateError::UnsupportedHop {
                source_lang: source.to_string(),
                target_lang: target.to_string(),
            });
        }
    }

    let mut slot_of_key: HashMap<String, usize> = HashMap::new();
    let mut unique: Vec<(String, String)> = Vec::new();
    let mut slots = Vec::with_capacity(texts.len());
    for text in texts {
        let key = cache_key(text, chain);
        let next = unique.len();
        let slot = *slot_of_key.entry(key.clone()).or_insert_with(|| {
            unique.push((key, normalize(text)));
            next
        });
        slots.push(slot);
    }

    let mut results: Vec<Option<String>> = unique.iter().map(|(k, _)| cache.get(k)).collect();
    let missing: Vec<usize> = (0..unique.len()).filter(|&i| results[i].is_none()).collect();
    cache.record((unique.len() - missing.len()) as u64, missing.len() as u64);

    if !missing.is_empty() {
        let mut current: Vec<String> = missing.iter().map(|&i| unique[i].1.clone()).collect();
        for (source, target) in chain.hops() {
            current = translate_hop(backend, source, target, &current)?;
        }
        let fresh: Vec<(String, String)> = missing
            .iter()
            .zip(current)
            .map(|(&i, out)| (unique[i].0.clone(), out))
            .collect();
        cache.insert_many(&fresh)?;
        for (&i, (_, out)) in missing.iter().zip(fresh) {
            results[i] = Some(out);
        }
    }

    Ok(slots
        .into_iter()
        .map(|slot| results[slot].clone().expect("every unique text resolved"))
        .collect())
}

/// Independent Bernoulli(p) draw per candidate, in candidate order.
fn select_segments(plan: &SegmentPlan, p: Probability, rng: &mut RngState) -> Vec<usize> {
    let mut selected = Vec::new();
    for &candidate in &plan.candidates {
        if rng.bernoulli(p) {
            selected.push(candidate);
        }
    }
    selected
}

fn segment_text(s: &LabeledSentence, plan: &SegmentPlan, index: usize) -> String {
    join_tokens(plan.segments[index].tokens(s))
}

/// Replaces the `selected` segments with `translations` (same order).
fn splice(s: &LabeledSentence, plan: &SegmentPlan, selected: &[usize], translations: &[String]) -> Augmented {
    let mut tokens = Vec::with_capacity(s.len());
    let mut labels = Vec::with_capacity(s.len());
    let mut warnings = Vec::new();
    let mut next = 0;
    for (i, seg) in plan.segments.iter().enumerate() {
        if selected.get(next) == Some(&i) {
            let translated = &translations[next];
            next += 1;
            let new_tokens: Vec<Token> = translated
                .split_whitespace()
                .map(|t| Token::new(t).expect("whitespace-split text is a valid token"))
                .collect();
            if !new_tokens.is_empty() {
                labels.extend(std::iter::repeat_n(Label::Outside, new_tokens.len()));
                tokens.extend(new_tokens);
                continue;
            }
            warnings.push(Warning::EmptyTranslation {
                text: join_tokens(seg.tokens(s)),
            });
        }
        tokens.extend_from_slice(seg.tokens(s));
        labels.extend_from_slice(&s.labels()[seg.start..seg.end]);
    }
    Augmented {
        sentence: LabeledSentence::from_parts_unchecked(tokens, labels),
        warnings,
    }
}

/// Backtranslates the selected context segments of one sentence.
///
/// No backend call is made when no segment is selected.
pub fn backtranslate_sentence(
    s: &LabeledSentence,
    cfg: &BacktranslationConfig,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    rng: &mut RngState,
) -> Result<Augmented, BacktranslateError> {
    let plan = plan_candidates(segment(s), cfg.min_tokens);
    let selected = select_segments(&plan, cfg.p, rng);
    if selected.is_empty() {
        return Ok(Augmented::clean(s.clone()));
    }
    let texts: Vec<String> = selected.iter().map(|&i| segment_text(s, &plan, i)).collect();
    let translations = translate_chain(&texts, &cfg.chain, backend, cache)?;
    Ok(splice(s, &plan, &selected, &translations))
}

struct Slot {
    sentence: usize,
    k: usize,
    rng: RngState,
    retries_left: usize,
}

/// Produces up to `cfg.multiplicity` accepted augmentations per sentence.
///
/// Work proceeds in rounds. In each round every pending slot draws its
/// segment selection, all selected texts go to the backend as one batch, and
/// slots whose result equals the source are redrawn in the next round until
/// their retry budget runs out. Results depend only on `run_seed`, never on
/// thread count.
pub(crate) fn generate(
    c: &Corpus,
    cfg: &BacktranslationConfig,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    run_seed: u64,
    stream_offset: usize,
) -> (Vec<Vec<LabeledSentence>>, RunCounters) {
    let sentences = c.sentences();
    let n = cfg.multiplicity;
    let mut counters = RunCounters::default();
    let stats_before = cache.stats();

    let plans: Vec<SegmentPlan> = sentences
        .par_iter()
        .map(|s| plan_candidates(segment(s), cfg.min_tokens))
        .collect();
    let mut accepted: Vec<Vec<Option<LabeledSentence>>> = vec![vec![None; n]; sentences.len()];
    let mut pending: Vec<Slot> = (0..sentences.len())
        .flat_map(|i| {
            (0..n).map(move |k| Slot {
                sentence: i,
                k,
                rng: RngState::derive(run_seed, i as u64, (stream_offset + k) as u64),
                retries_left: cfg.retry_budget,
            })
        })
        .collect();

    while !pending.is_empty() {
        let selections: Vec<Vec<usize>> = pending
            .par_iter_mut()
            .map(|slot| select_segments(&plans[slot.sentence], cfg.p, &mut slot.rng))
            .collect();
        let mut texts = Vec::new();
        let mut offsets = Vec::with_capacity(pending.len());
        for (slot, selected) in pending.iter().zip(&selections) {
            offsets.push(texts.len());
            let s = &sentences[slot.sentence];
            texts.extend(selected.iter().map(|&i| segment_text(s, &plans[slot.sentence], i)));
        }

        let translations = match translate_chain(&texts, &cfg.chain, backend, cache) {
            Ok(t) => t,
            Err(e) => {
                log::error!("backtranslation failed: {e}");
                counters.failed += pending.len();
                counters.errors.push(e.to_string());
                break;
            }
        };

        let results: Vec<Option<Augmented>> = pending
            .par_iter()
            .zip(&selections)
            .zip(&offsets)
            .map(|((slot, selected), &offset)| {
                if selected.is_empty() {
                    return None;
                }
                let s = &sentences[slot.sentence];
                let outs = &translations[offset..offset + selected.len()];
                Some(splice(s, &plans[slot.sentence], selected, outs))
            })
            .collect();

        let mut next_round = Vec::new();
        for (mut slot, result) in pending.into_iter().zip(results) {
            let source = &sentences[slot.sentence];
            let fresh = match result {
                Some(aug) => {
                    counters.add_warnings(&aug.warnings);
                    (aug.sentence != *source).then_some(aug.sentence)
                }
                None => None,
            };
            match fresh {
                Some(sentence) => {
                    accepted[slot.sentence][slot.k] = Some(sentence);
                    counters.generated += 1;
                }
                None if slot.retries_left > 0 => {
                    slot.retries_left -= 1;
                    next_round.push(slot);
                }
                None => counters.dropped += 1,
            }
        }
        pending = next_round;
    }

    let delta = cache.stats().since(stats_before);
    counters.backend_texts += delta.misses;
    counters.cache_hits += delta.hits;
    let per_sentence = accepted
        .into_iter()
        .map(|slots| slots.into_iter().flatten().collect())
        .collect();
    (per_sentence, counters)
}

/// Augments a corpus by backtranslation. Each original sentence is followed
/// by its accepted augmentations. Backend failures do not abort the run:
/// the affected sentences stay unaugmented and are counted in
/// [`RunCounters::failed`].
pub fn augment_corpus_bt(
    c: &Corpus,
    cfg: &BacktranslationConfig,
    backend: &dyn TranslationBackend,
    cache: &TranslationCache,
    run_seed: u64,
) -> Result<AugmentOutcome, BacktranslateError> {
    cfg.validate()?;
    let (per_sentence, counters) = generate(c, cfg, backend, cache, run_seed, 0);
    Ok(AugmentOutcome {
        corpus: assemble(c, &[per_sentence]),
        counters,
    })
}
