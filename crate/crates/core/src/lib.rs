//! Data augmentation for token-level NER corpora in CoNLL/IOB2 format.
//!
//! The main method paraphrases only the context around entity mentions:
//! a sentence is split into segments of equal labels, and `O` segments of at
//! least three tokens are sent through a backtranslation chain while mention
//! tokens are copied unchanged. Four rule-based augmenters (label-wise token
//! replacement, synonym replacement, mention replacement and shuffling within
//! segments) are provided for comparison, together with the tooling for
//! low-resource experiments: nested subsets, hyperparameter grids and
//! distinct-1 diversity reports.
//!
//! ```
//! use ner_augment::backtranslate::{IdentityBackend, TranslationCache};
//! use ner_augment::corpus::{parse_conll_str, ParseOptions};
//! use ner_augment::pipeline::{augment_corpus, AugmentRequest};
//! use ner_augment::augment::Method;
//!
//! let corpus = parse_conll_str(
//!     "Acme\tB-ORG\nhired\tO\nthree\tO\nnew\tO\nchemists\tO\n\n",
//!     &ParseOptions::default(),
//! )?;
//! let cache = TranslationCache::in_memory();
//! let request = AugmentRequest::new(Method::Bt, &IdentityBackend, &cache);
//! let out = augment_corpus(&corpus, &request)?;
//! // identity translation never changes a sentence, so nothing is added
//! assert_eq!(out.corpus, corpus);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

pub mod augment;
pub mod backtranslate;
pub mod corpus;
pub mod experiment;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod segment;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/corpus.md")]
    pub mod corpus {}
    #[doc = include_str!("../../../book/src/segments.md")]
    pub mod segments {}
    #[doc = include_str!("../../../book/src/backtranslation.md")]
    pub mod backtranslation {}
    #[doc = include_str!("../../../book/src/backends.md")]
    pub mod backends {}
    #[doc = include_str!("../../../book/src/augmenters.md")]
    pub mod augmenters {}
    #[doc = include_str!("../../../book/src/determinism.md")]
    pub mod determinism {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    pub mod metrics {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub mod experiments {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
