//! Corpus-level augmentation driver.
//!
//! For every sentence and every requested augmentation a random stream is
//! derived from `(run_seed, sentence index, augmentation index)`. An
//! augmentation that comes out identical to its source is redrawn up to
//! `retry_budget` times and then dropped. The output lists each original
//! sentence followed by its accepted augmentations.
//!
//! With [`Method::All`] every single method contributes `multiplicity`
//! augmentations, in the order lwtr, sr, mr, sis, bt; method `m` (0-based in
//! that list) uses augmentation indices `m * n .. (m + 1) * n`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{
    build_label_vocabulary, build_mention_dictionary, Method, RuleAugmenter, ShuffleMode, SynonymLexicon, Warning,
};
use crate::backtranslate::{self, BacktranslationConfig, LanguageChain, TranslationBackend, TranslationCache};
use crate::corpus::{Corpus, LabeledSentence};
use crate::rng::{Probability, RngState};
use crate::segment::DEFAULT_MIN_TOKENS;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("method `{0}` needs a synonym lexicon")]
    MissingLexicon(Method),
    #[error("multiplicity must be at least 1")]
    ZeroMultiplicity,
    #[error(transparent)]
    Backtranslate(#[from] backtranslate::BacktranslateError),
}

/// What happened during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounters {
    /// Augmentations kept.
    pub generated: usize,
    /// Augmentation slots given up after their retry budget.
    pub dropped: usize,
    /// Augmentation slots lost to backend errors.
    pub failed: usize,
    /// Warning counts by kind.
    pub warnings: BTreeMap<String, usize>,
    pub errors: Vec<String>,
    /// Distinct texts sent through the translation chain.
    pub backend_texts: u64,
    /// Translation lookups answered by the cache.
    pub cache_hits: u64,
}

impl RunCounters {
    pub(crate) fn add_warnings(&mut self, warnings: &[Warning]) {
        for w in warnings {
            let kind = match w {
                Warning::MissingLabelVocab { .. } => "missing_label_vocab",
                Warning::EmptyTranslation { .. } => "empty_translation",
            };
            *self.warnings.entry(kind.to_string()).or_default() += 1;
        }
    }

    pub fn merge(&mut self, other: RunCounters) {
        self.generated += other.generated;
        self.dropped += other.dropped;
        self.failed += other.failed;
        for (k, v) in other.warnings {
            *self.warnings.entry(k).or_default() += v;
        }
        self.errors.extend(other.errors);
        self.backend_texts += other.backend_texts;
        self.cache_hits += other.cache_hits;
    }
}

#[derive(Debug, Clone)]
pub struct AugmentOutcome {
    pub corpus: Corpus,
    pub counters: RunCounters,
}

/// Interleaves originals with the augmentations of each arm.
pub(crate) fn assemble(c: &Corpus, arms: &[Vec<Vec<LabeledSentence>>]) -> Corpus {
    let mut out = Vec::new();
    for (i, s) in c.iter().enumerate() {
        out.push(s.clone());
        for arm in arms {
            out.extend(arm[i].iter().cloned());
        }
    }
    Corpus::new(out)
}

fn generate_rule(
    c: &Corpus,
    augmenter: RuleAugmenter<'_>,
    p: Probability,
    multiplicity: usize,
    retry_budget: usize,
    run_seed: u64,
    stream_offset: usize,
) -> (Vec<Vec<LabeledSentence>>, RunCounters) {
    let per_sentence: Vec<(Vec<LabeledSentence>, RunCounters)> = c
        .sentences()
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mut counters = RunCounters::default();
            let mut kept = Vec::new();
            for k in 0..multiplicity {
                let mut rng = RngState::derive(run_seed, i as u64, (stream_offset + k) as u64);
                let mut accepted = false;
                for _ in 0..=retry_budget {
                    let out = augmenter.apply(s, p, &mut rng);
                    counters.add_warnings(&out.warnings);
                    if out.sentence != *s {
                        kept.push(out.sentence);
                        accepted = true;
                        break;
                    }
                }
                if accepted {
                    counters.generated += 1;
                } else {
                    counters.dropped += 1;
                }
            }
            (kept, counters)
        })
        .collect();
    let mut counters = RunCounters::default();
    let mut out = Vec::with_capacity(per_sentence.len());
    for (kept, c) in per_sentence {
        out.push(kept);
        counters.merge(c);
    }
    (out, counters)
}

/// Everything needed to run one augmentation method over a corpus.
#[derive(Clone)]
pub struct AugmentRequest<'a> {
    pub method: Method,
    pub p: Probability,
    pub multiplicity: usize,
    pub retry_budget: usize,
    pub run_seed: u64,
    pub min_tokens: usize,
    pub chain: LanguageChain,
    pub shuffle_mode: ShuffleMode,
    pub lexicon: Option<&'a SynonymLexicon>,
    pub backend: &'a dyn TranslationBackend,
    pub cache: &'a TranslationCache,
}

impl<'a> AugmentRequest<'a> {
    /// Defaults: p = 0.5, n = 1, retry budget 3, min_tokens 3, `en-de-en`.
    pub fn new(method: Method, backend: &'a dyn TranslationBackend, cache: &'a TranslationCache) -> Self {
        AugmentRequest {
            method,
            p: Probability::new(0.5).unwrap(),
            multiplicity: 1,
            retry_budget: 3,
            run_seed: crate::rng::DEFAULT_SEED,
            min_tokens: DEFAULT_MIN_TOKENS,
            chain: LanguageChain::default(),
            shuffle_mode: ShuffleMode::default(),
            lexicon: None,
            backend,
            cache,
        }
    }

    fn bt_config(&self) -> BacktranslationConfig {
        BacktranslationConfig {
            p: self.p,
            min_tokens: self.min_tokens,
            chain: self.chain.clone(),
            multiplicity: self.multiplicity,
            retry_budget: self.retry_budget,
        }
    }
}

/// Runs `req.method` over `c`. Label vocabulary and mention dictionary are
/// built from `c` itself.
pub fn augment_corpus(c: &Corpus, req: &AugmentRequest<'_>) -> Result<AugmentOutcome, PipelineError> {
    if req.multiplicity == 0 {
        return Err(PipelineError::ZeroMultiplicity);
    }
    let arms = req.method.arms();
    if arms.contains(&Method::Sr) && req.lexicon.is_none() {
        return Err(PipelineError::MissingLexicon(req.method));
    }
    let bt_cfg = req.bt_config();
    if arms.contains(&Method::Bt) {
        bt_cfg.validate()?;
    }
    let vocab = arms.contains(&Method::Lwtr).then(|| build_label_vocabulary(c));
    let dict = arms.contains(&Method::Mr).then(|| build_mention_dictionary(c));

    let mut outputs = Vec::with_capacity(arms.len());
    let mut counters = RunCounters::default();
    for (arm_index, arm) in arms.iter().enumerate() {
        let offset = arm_index * req.multiplicity;
        let rule = match arm {
            Method::Lwtr => Some(RuleAugmenter::Lwtr(vocab.as_ref().unwrap())),
            Method::Sr => Some(RuleAugmenter::Sr(req.lexicon.unwrap())),
            Method::Mr => Some(RuleAugmenter::Mr(dict.as_ref().unwrap())),
            Method::Sis => Some(RuleAugmenter::Sis(req.shuffle_mode)),
            Method::Bt => None,
            Method::All => unreachable!("arms are single methods"),
        };
        let (kept, arm_counters) = match rule {
            Some(rule) => generate_rule(c, rule, req.p, req.multiplicity, req.retry_budget, req.run_seed, offset),
            None => backtranslate::generate(c, &bt_cfg, req.backend, req.cache, req.run_seed, offset),
        };
        outputs.push(kept);
        counters.merge(arm_counters);
    }
    Ok(AugmentOutcome {
        corpus: assemble(c, &outputs),
        counters,
    })
}
