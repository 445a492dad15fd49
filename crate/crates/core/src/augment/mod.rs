//! Rule-based augmenters.
//!
//! Each transform maps one sentence to one new sentence using an explicit
//! [`RngState`]. Decisions are made per unit with independent Bernoulli(p)
//! draws: per token for label-wise token replacement and synonym
//! replacement, per mention for mention replacement, per segment for
//! shuffling. All transforms are the identity at `p = 0` and always return
//! IOB2-valid sentences.

mod lwtr;
mod mention;
mod resources;
mod shuffle;
mod synonym;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledSentence;
use crate::rng::{Probability, RngState};

pub use lwtr::lwtr;
pub use mention::mention_replace;
pub use resources::{
    build_label_vocabulary, build_mention_dictionary, LabelVocabulary, LexiconError, MentionDictionary,
    SynonymLexicon,
};
pub use shuffle::{shuffle_within_segments, ShuffleMode};
pub use synonym::synonym_replace;

/// Non-fatal problems met while augmenting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    /// A token was picked for replacement but nothing was ever seen with its label.
    MissingLabelVocab { label: String },
    /// The translation chain returned nothing for a segment; it was kept as is.
    EmptyTranslation { text: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::MissingLabelVocab { label } => write!(f, "no vocabulary for label {label}; token kept"),
            Warning::EmptyTranslation { text } => write!(f, "empty translation for {text:?}; segment kept"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Augmented {
    pub sentence: LabeledSentence,
    pub warnings: Vec<Warning>,
}

impl Augmented {
    pub(crate) fn clean(sentence: LabeledSentence) -> Self {
        Augmented {
            sentence,
            warnings: Vec::new(),
        }
    }
}

/// Augmentation method identifiers as used on the command line and in file names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lwtr,
    Sr,
    Mr,
    Sis,
    Bt,
    /// Every method above, each contributing `n` augmentations per sentence.
    All,
}

impl Method {
    pub const SINGLE: [Method; 5] = [Method::Lwtr, Method::Sr, Method::Mr, Method::Sis, Method::Bt];

    pub fn id(self) -> &'static str {
        match self {
            Method::Lwtr => "lwtr",
            Method::Sr => "sr",
            Method::Mr => "mr",
            Method::Sis => "sis",
            Method::Bt => "bt",
            Method::All => "all",
        }
    }

    /// The single methods this one expands to.
    pub fn arms(self) -> Vec<Method> {
        match self {
            Method::All => Method::SINGLE.to_vec(),
            m => vec![m],
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "lwtr" => Ok(Method::Lwtr),
            "sr" => Ok(Method::Sr),
            "mr" => Ok(Method::Mr),
            "sis" => Ok(Method::Sis),
            "bt" => Ok(Method::Bt),
            "all" => Ok(Method::All),
            other => Err(format!("unknown method `{other}` (expected lwtr, sr, mr, sis, bt or all)")),
        }
    }
}

/// A rule-based transform bound to its resources.
#[derive(Debug, Clone, Copy)]
pub enum RuleAugmenter<'a> {
    Lwtr(&'a LabelVocabulary),
    Sr(&'a SynonymLexicon),
    Mr(&'a MentionDictionary),
    Sis(ShuffleMode),
}

impl RuleAugmenter<'_> {
    pub fn apply(&self, s: &LabeledSentence, p: Probability, rng: &mut RngState) -> Augmented {
        match *self {
            RuleAugmenter::Lwtr(vocab) => lwtr(s, vocab, p, rng),
            RuleAugmenter::Sr(lex) => Augmented::clean(synonym_replace(s, lex, p, rng)),
            RuleAugmenter::Mr(dict) => Augmented::clean(mention_replace(s, dict, p, rng)),
            RuleAugmenter::Sis(mode) => Augmented::clean(shuffle_within_segments(s, p, rng, mode)),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            RuleAugmenter::Lwtr(_) => Method::Lwtr,
            RuleAugmenter::Sr(_) => Method::Sr,
            RuleAugmenter::Mr(_) => Method::Mr,
            RuleAugmenter::Sis(_) => Method::Sis,
        }
    }
}
