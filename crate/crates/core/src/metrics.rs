//! Lexical diversity and run reports.
//!
//! distinct-1 of a sentence is the number of distinct tokens divided by the
//! number of tokens (exact, case-sensitive matching). A corpus is summarized
//! two ways: the mean of the per-sentence values (the headline number) and
//! the corpus-wide ratio of distinct tokens to tokens.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{compute_stats, Corpus, CorpusStats, LabeledSentence};
use crate::experiment::AugmentationPlan;
use crate::pipeline::RunCounters;

/// Bumped whenever a field of a JSON document written by this crate changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot measure diversity of an empty corpus")]
    EmptyCorpus,
}

pub fn distinct1(s: &LabeledSentence) -> f64 {
    let distinct: HashSet<&str> = s.tokens().iter().map(|t| t.as_str()).collect();
    distinct.len() as f64 / s.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub per_sentence: Vec<f64>,
    pub macro_mean: f64,
    pub corpus_level: f64,
}

impl DiversityReport {
    pub fn summary(&self) -> DiversitySummary {
        DiversitySummary {
            sentences: self.per_sentence.len(),
            macro_mean: self.macro_mean,
            corpus_level: self.corpus_level,
        }
    }
}

/// [`DiversityReport`] without the per-sentence values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversitySummary {
    pub sentences: usize,
    pub macro_mean: f64,
    pub corpus_level: f64,
}

pub fn diversity_report(c: &Corpus) -> Result<DiversityReport, MetricsError> {
    if c.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let per_sentence: Vec<f64> = c.iter().map(distinct1).collect();
    let macro_mean = per_sentence.iter().sum::<f64>() / per_sentence.len() as f64;
    let mut vocab = HashSet::new();
    let mut total = 0usize;
    for s in c {
        total += s.len();
        vocab.extend(s.tokens().iter().map(|t| t.as_str()));
    }
    Ok(DiversityReport {
        per_sentence,
        macro_mean,
        corpus_level: vocab.len() as f64 / total as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunCounts {
    pub original_sentences: usize,
    pub output_sentences: usize,
    pub generated: usize,
    pub dropped: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsPair {
    pub original: CorpusStats,
    pub augmented: CorpusStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityPair {
    pub original: Option<DiversitySummary>,
    pub augmented: Option<DiversitySummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendCounts {
    pub texts_translated: u64,
    pub cache_hits: u64,
}

/// Summary of one augmentation run, written as `<output>.report.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub plan: AugmentationPlan,
    pub counts: RunCounts,
    pub warnings: std::collections::BTreeMap<String, usize>,
    pub errors: Vec<String>,
    pub stats: StatsPair,
    pub diversity: DiversityPair,
    pub backend: BackendCounts,
}

pub fn run_report(original: &Corpus, augmented: &Corpus, plan: &AugmentationPlan, counters: &RunCounters) -> RunReport {
    let summary = |c: &Corpus| diversity_report(c).ok().map(|r| r.summary());
    RunReport {
        schema_version: SCHEMA_VERSION,
        plan: plan.clone(),
        counts: RunCounts {
            original_sentences: original.len(),
            output_sentences: augmented.len(),
            generated: counters.generated,
            dropped: counters.dropped,
            failed: counters.failed,
        },
        warnings: counters.warnings.clone(),
        errors: counters.errors.clone(),
        stats: StatsPair {
            original: compute_stats(original),
            augmented: compute_stats(augmented),
        },
        diversity: DiversityPair {
            original: summary(original),
            augmented: summary(augmented),
        },
        backend: BackendCounts {
            texts_translated: counters.backend_texts,
            cache_hits: counters.cache_hits,
        },
    }
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = &self.plan;
        writeln!(
            f,
            "method {} p={} n={} seed={} subset={}",
            p.method, p.p, p.multiplicity, p.run_seed, p.subset
        )?;
        let c = &self.counts;
        writeln!(
            f,
            "sentences: {} in, {} out ({} generated, {} dropped, {} failed)",
            c.original_sentences, c.output_sentences, c.generated, c.dropped, c.failed
        )?;
        let (o, a) = (&self.stats.original, &self.stats.augmented);
        writeln!(f, "tokens: {} -> {}", o.n_tokens, a.n_tokens)?;
        writeln!(f, "mentions: {} -> {} ({} -> {} unique)", o.n_mentions, a.n_mentions, o.n_unique_mentions, a.n_unique_mentions)?;
        if let (Some(o), Some(a)) = (&self.diversity.original, &self.diversity.augmented) {
            writeln!(
                f,
                "distinct-1: {:.4} -> {:.4} (corpus-level {:.4} -> {:.4})",
                o.macro_mean, a.macro_mean, o.corpus_level, a.corpus_level
            )?;
        }
        writeln!(
            f,
            "backend: {} texts translated, {} cache hits",
            self.backend.texts_translated, self.backend.cache_hits
        )?;
        for (kind, n) in &self.warnings {
            writeln!(f, "warning: {kind} x{n}")?;
        }
        for e in &self.errors {
            writeln!(f, "error: {e}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_conll_str, ParseOptions};
    use crate::corpus::Token;
    use proptest::prelude::*;

    fn words(ws: &[&str]) -> LabeledSentence {
        let pairs: Vec<(&str, &str)> = ws.iter().map(|w| (*w, "O")).collect();
        LabeledSentence::from_pairs(&pairs).unwrap()
    }

    #[test]
    fn distinct1_values() {
        assert_eq!(distinct1(&words(&["a", "b", "c"])), 1.0);
        assert_eq!(distinct1(&words(&["a", "a", "a", "a"])), 0.25);
        assert_eq!(distinct1(&words(&["the", "cat", "and", "the", "dog"])), 0.8);
        assert_eq!(distinct1(&words(&["The", "the"])), 1.0);
    }

    #[test]
    fn macro_mean() {
        let one = Corpus::new(vec![words(&["a", "a", "b"])]);
        let r = diversity_report(&one).unwrap();
        assert_eq!(r.macro_mean, distinct1(&one.sentences()[0]));

        let two = Corpus::new(vec![words(&["a", "b"]), words(&["c", "c"])]);
        let r = diversity_report(&two).unwrap();
        assert_eq!(r.per_sentence, [1.0, 0.5]);
        assert_eq!(r.macro_mean, 0.75);
        assert_eq!(r.corpus_level, 0.75);
        assert_eq!(diversity_report(&Corpus::default()), Err(MetricsError::EmptyCorpus));
    }

    #[test]
    fn report_json_round_trips() {
        let c = parse_conll_str("Acme\tB-ORG\nwins\tO\n\n", &ParseOptions::default()).unwrap();
        let report = run_report(&c, &c, &AugmentationPlan::default(), &RunCounters::default());
        let json = report.to_json();
        let back: RunReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
        assert_eq!(back.to_json(), json);
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(v["schema_version"], 1);
        assert!(report.to_string().contains("sentences: 1 in, 1 out"));
    }

    proptest! {
        #[test]
        fn distinct1_properties(ids in prop::collection::vec(0u8..6, 1..30), seed: u64) {
            let tokens: Vec<String> = ids.iter().map(|i| format!("w{i}")).collect();
            let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
            let d = distinct1(&words(&refs));
            prop_assert!(d > 0.0 && d <= 1.0);
            let all_distinct = ids.iter().collect::<HashSet<_>>().len() == ids.len();
            prop_assert_eq!(d == 1.0, all_distinct);

            let mut shuffled: Vec<Token> = tokens.iter().map(|t| Token::new(t.as_str()).unwrap()).collect();
            crate::rng::RngState::from_seed(seed).shuffle(&mut shuffled);
            let refs: Vec<&str> = shuffled.iter().map(Token::as_str).collect();
            prop_assert_eq!(distinct1(&words(&refs)), d);
        }

        #[test]
        fn macro_mean_ignores_sentence_order(lens in prop::collection::vec(1usize..6, 1..8), seed: u64) {
            let sentences: Vec<LabeledSentence> = lens
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let ws: Vec<String> = (0..n).map(|j| format!("w{}", (i + j) % 3)).collect();
                    let refs: Vec<&str> = ws.iter().map(String::as_str).collect();
                    words(&refs)
                })
                .collect();
            let a = diversity_report(&Corpus::new(sentences.clone())).unwrap();
            let mut shuffled = sentences;
            crate::rng::RngState::from_seed(seed).shuffle(&mut shuffled);
            let b = diversity_report(&Corpus::new(shuffled)).unwrap();
            prop_assert!((a.macro_mean - b.macro_mean).abs() < 1e-12);
            prop_assert!((a.corpus_level - b.corpus_level).abs() < 1e-12);
        }
    }
}
