//! Low-resource subsets, hyperparameter grids and plan execution.
//!
//! Subsets are nested: one permutation of the sentence indices is drawn per
//! seed and every size takes a prefix of it, so the 50-sentence subset is
//! contained in the 150-sentence one. Within a subset sentences keep their
//! corpus order.
//!
//! Every executed plan writes
//! `<out_dir>/<dataset>/<subset>/<method>_n<n>_p<p>_s<seed>.conll` and a
//! sibling `.report.json`, each through a temporary file that is renamed into
//! place.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::{LexiconError, Method, ShuffleMode, SynonymLexicon};
use crate::backtranslate::{BackendError, BackendSpec, CacheError, HttpBackendConfig, LanguageChain, TranslationBackend, TranslationCache};
use crate::corpus::{parse_conll, write_conll, Corpus, CorpusError, ParseOptions};
use crate::metrics::{run_report, RunReport};
use crate::pipeline::{augment_corpus, AugmentRequest, PipelineError};
use crate::rng::{mix_seed, Probability, RngState, DEFAULT_SEED};
use crate::segment::DEFAULT_MIN_TOKENS;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("subset of {requested} sentences requested from a corpus of {available}")]
    SubsetTooLarge { requested: usize, available: usize },
    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
    #[error("refusing to write {0}: it is a protected input")]
    ProtectedPath(PathBuf),
    #[error("{path}: {source}")]
    Corpus {
        path: PathBuf,
        #[source]
        source: CorpusError,
    },
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A subset size: a sentence count or the whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "SizeRepr", into = "SizeRepr")]
pub enum SubsetSize {
    Count(usize),
    All,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SizeRepr {
    Count(usize),
    Word(String),
}

impl TryFrom<SizeRepr> for SubsetSize {
    type Error = String;

    fn try_from(r: SizeRepr) -> Result<Self, String> {
        match r {
            SizeRepr::Count(n) => Ok(SubsetSize::Count(n)),
            SizeRepr::Word(w) => w.parse(),
        }
    }
}

impl From<SubsetSize> for SizeRepr {
    fn from(s: SubsetSize) -> Self {
        match s {
            SubsetSize::Count(n) => SizeRepr::Count(n),
            SubsetSize::All => SizeRepr::Word("all".into()),
        }
    }
}

impl FromStr for SubsetSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            return Ok(SubsetSize::All);
        }
        s.parse()
            .map(SubsetSize::Count)
            .map_err(|_| format!("invalid subset size `{s}` (expected a count or `all`)"))
    }
}

impl fmt::Display for SubsetSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubsetSize::Count(n) => write!(f, "{n}"),
            SubsetSize::All => f.write_str("all"),
        }
    }
}

pub const DEFAULT_SIZES: [SubsetSize; 4] = [
    SubsetSize::Count(50),
    SubsetSize::Count(150),
    SubsetSize::Count(500),
    SubsetSize::All,
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetSpec {
    pub sizes: Vec<SubsetSize>,
    pub seed: u64,
}

impl Default for SubsetSpec {
    fn default() -> Self {
        SubsetSpec {
            sizes: DEFAULT_SIZES.to_vec(),
            seed: DEFAULT_SEED,
        }
    }
}

impl SubsetSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.sizes.is_empty() {
            return Err(ExperimentError::InvalidSpec("no subset sizes given".into()));
        }
        if self.sizes.contains(&SubsetSize::Count(0)) {
            return Err(ExperimentError::InvalidSpec("subset sizes must be positive".into()));
        }
        if self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ExperimentError::InvalidSpec("subset sizes must be strictly ascending".into()));
        }
        Ok(())
    }
}

/// Draws nested subsets of `c`, one per size in `spec`.
pub fn subset(c: &Corpus, spec: &SubsetSpec) -> Result<BTreeMap<SubsetSize, Corpus>, ExperimentError> {
    spec.validate()?;
    let mut order: Vec<usize> = (0..c.len()).collect();
    RngState::from_seed(mix_seed(spec.seed, "subset")).shuffle(&mut order);
    let mut out = BTreeMap::new();
    for &size in &spec.sizes {
        let k = match size {
            SubsetSize::All => c.len(),
            SubsetSize::Count(k) if k > c.len() => {
                return Err(ExperimentError::SubsetTooLarge {
                    requested: k,
                    available: c.len(),
                })
            }
            SubsetSize::Count(k) => k,
        };
        let mut picked = order[..k].to_vec();
        picked.sort_unstable();
        out.insert(size, picked.into_iter().map(|i| c.sentences()[i].clone()).collect());
    }
    Ok(out)
}

/// Everything that determines one augmentation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub method: Method,
    pub p: Probability,
    pub multiplicity: usize,
    /// Seed named in the output file.
    pub seed: u64,
    /// Seed the augmenters actually draw from.
    pub run_seed: u64,
    pub subset: SubsetSize,
    /// Backend description, e.g. `identity` or `dict:table.tsv`.
    pub backend: String,
    pub chain: LanguageChain,
    pub min_tokens: usize,
    pub retry_budget: usize,
    pub shuffle_mode: ShuffleMode,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        AugmentationPlan {
            method: Method::Bt,
            p: Probability::new(0.5).unwrap(),
            multiplicity: 1,
            seed: DEFAULT_SEED,
            run_seed: DEFAULT_SEED,
            subset: SubsetSize::All,
            backend: BackendSpec::Identity.to_string(),
            chain: LanguageChain::default(),
            min_tokens: DEFAULT_MIN_TOKENS,
            retry_budget: 3,
            shuffle_mode: ShuffleMode::default(),
        }
    }
}

impl AugmentationPlan {
    pub fn file_stem(&self) -> String {
        format!("{}_n{}_p{}_s{}", self.method, self.multiplicity, self.p, self.seed)
    }

    pub fn output_dir(&self, out_dir: &Path, dataset: &str) -> PathBuf {
        out_dir.join(dataset).join(self.subset.to_string())
    }
}

pub const DEFAULT_MULTIPLICITIES: [usize; 4] = [1, 3, 6, 10];
pub const DEFAULT_COMBINED_MULTIPLICITIES: [usize; 3] = [1, 2, 3];
pub const DEFAULT_PROBABILITIES: [f64; 4] = [0.1, 0.3, 0.5, 0.7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub augmenters: Vec<Method>,
    /// Multiplicities searched for single methods.
    pub multiplicities: Vec<usize>,
    /// Multiplicities searched for [`Method::All`], where each method adds `n`.
    pub combined_multiplicities: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub sizes: Vec<SubsetSize>,
    pub seeds: Vec<u64>,
    /// Backend, chain, segment and retry settings shared by every plan.
    pub base: AugmentationPlan,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            augmenters: vec![Method::Bt],
            multiplicities: DEFAULT_MULTIPLICITIES.to_vec(),
            combined_multiplicities: DEFAULT_COMBINED_MULTIPLICITIES.to_vec(),
            probabilities: DEFAULT_PROBABILITIES.to_vec(),
            sizes: vec![SubsetSize::All],
            seeds: vec![DEFAULT_SEED],
            base: AugmentationPlan::default(),
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: &str| Err(ExperimentError::InvalidSpec(msg.into()));
        if self.augmenters.is_empty() {
            return bad("no augmenters given");
        }
        if self.probabilities.is_empty() {
            return bad("no probabilities given");
        }
        if self.sizes.is_empty() {
            return bad("no subset sizes given");
        }
        if self.seeds.is_empty() {
            return bad("no seeds given");
        }
        let singles = self.augmenters.iter().any(|m| *m != Method::All);
        let combined = self.augmenters.contains(&Method::All);
        if singles && self.multiplicities.is_empty() || combined && self.combined_multiplicities.is_empty() {
            return bad("no multiplicities given");
        }
        if self.multiplicities.iter().chain(&self.combined_multiplicities).any(|&n| n == 0) {
            return bad("multiplicities must be at least 1");
        }
        if self.probabilities.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return bad("grid probabilities must lie strictly between 0 and 1");
        }
        Ok(())
    }
}

/// Cartesian product of sizes, seeds, augmenters, multiplicities and
/// probabilities, in that nesting order.
pub fn expand_grid(spec: &GridSpec) -> Result<Vec<AugmentationPlan>, ExperimentError> {
    spec.validate()?;
    let mut plans = Vec::new();
    for &subset in &spec.sizes {
        for &seed in &spec.seeds {
            for &method in &spec.augmenters {
                let ns = if method == Method::All {
                    &spec.combined_multiplicities
                } else {
                    &spec.multiplicities
                };
                for &multiplicity in ns {
                    for &p in &spec.probabilities {
                        let mut plan = AugmentationPlan {
                            method,
                            p: Probability::new(p).expect("validated"),
                            multiplicity,
                            seed,
                            subset,
                            ..spec.base.clone()
                        };
                        plan.run_seed = mix_seed(seed, &format!("{}/{}", subset, plan.file_stem()));
                        plans.push(plan);
                    }
                }
            }
        }
    }
    Ok(plans)
}

/// Shared inputs for executing plans.
pub struct PlanContext<'a> {
    pub dataset: &'a str,
    pub out_dir: &'a Path,
    /// Files that must never be written, typically the dev and test splits.
    pub protected: &'a [PathBuf],
    pub lexicon: Option<&'a SynonymLexicon>,
    pub backend: &'a dyn TranslationBackend,
    pub cache: &'a TranslationCache,
}

#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub corpus_path: PathBuf,
    pub report_path: PathBuf,
    pub report: RunReport,
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(a), Ok(b)) => a == b,
        _ => a == b,
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// refusing any path in `protected`.
pub fn write_atomic(path: &Path, bytes: &[u8], protected: &[PathBuf]) -> Result<(), ExperimentError> {
    if protected.iter().any(|p| same_file(p, path)) {
        return Err(ExperimentError::ProtectedPath(path.to_path_buf()));
    }
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Runs `plan` on `train` (already subset) and writes the output corpus and
/// its report. Backend failures do not fail the call; they show up in the
/// report's `failed` count and `errors`.
pub fn execute_plan(plan: &AugmentationPlan, train: &Corpus, ctx: &PlanContext<'_>) -> Result<PlanOutput, ExperimentError> {
    let dir = plan.output_dir(ctx.out_dir, ctx.dataset);
    let stem = plan.file_stem();
    let corpus_path = dir.join(format!("{stem}.conll"));
    let report_path = dir.join(format!("{stem}.report.json"));
    for path in [&corpus_path, &report_path] {
        if ctx.protected.iter().any(|p| same_file(p, path)) {
            return Err(ExperimentError::ProtectedPath(path.clone()));
        }
    }

    let request = AugmentRequest {
        method: plan.method,
        p: plan.p,
        multiplicity: plan.multiplicity,
        retry_budget: plan.retry_budget,
        run_seed: plan.run_seed,
        min_tokens: plan.min_tokens,
        chain: plan.chain.clone(),
        shuffle_mode: plan.shuffle_mode,
        lexicon: ctx.lexicon,
        backend: ctx.backend,
        cache: ctx.cache,
    };
    let outcome = augment_corpus(train, &request)?;
    let report = run_report(train, &outcome.corpus, plan, &outcome.counters);

    let mut conll = Vec::new();
    write_conll(&outcome.corpus, &mut conll)?;
    write_atomic(&corpus_path, &conll, ctx.protected)?;
    write_atomic(&report_path, report.to_json().as_bytes(), ctx.protected)?;
    Ok(PlanOutput {
        corpus_path,
        report_path,
        report,
    })
}

/// A declarative experiment, read from TOML.
///
/// ```toml
/// dataset = "mascip"
/// train = "data/train.conll"
/// dev = "data/dev.conll"
/// test = "data/test.conll"
/// out_dir = "runs"
/// sizes = [50, 150, 500, "all"]
/// augmenters = ["lwtr", "bt", "all"]
/// backend = "dict:table.tsv"
/// ```
///
/// Relative paths are resolved against the manifest's directory. Keys not
/// shown default to the values documented on each field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dataset: String,
    pub train: PathBuf,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Default `[50, 150, 500, "all"]`.
    #[serde(default = "default_sizes")]
    pub sizes: Vec<SubsetSize>,
    /// Seed of the subset permutation; default 42.
    #[serde(default = "default_seed")]
    pub subset_seed: u64,
    /// Default `[42]`.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub augmenters: Vec<Method>,
    /// Default `[1, 3, 6, 10]`.
    #[serde(default = "default_multiplicities")]
    pub multiplicities: Vec<usize>,
    /// Default `[1, 2, 3]`.
    #[serde(default = "default_combined")]
    pub combined_multiplicities: Vec<usize>,
    /// Default `[0.1, 0.3, 0.5, 0.7]`.
    #[serde(default = "default_probabilities")]
    pub probabilities: Vec<f64>,
    /// Synonym lexicon; required for `sr` and `all`.
    pub lexicon: Option<PathBuf>,
    #[serde(default = "default_min_tokens")]
    pub min_tokens: usize,
    #[serde(default = "default_retry_budget")]
    pub retry_budget: usize,
    #[serde(default)]
    pub sis_mode: ShuffleMode,
    #[serde(default)]
    pub chain: LanguageChain,
    /// Translation cache file.
    pub cache: Option<PathBuf>,
    /// `identity`, `dict:FILE` or `http:URL`; default `identity`.
    #[serde(default = "default_backend")]
    pub backend: String,
    /// Extra HTTP client settings; `endpoint` comes from `backend`.
    pub http: Option<HttpBackendConfig>,
    /// Separate columns by tabs only instead of any whitespace.
    #[serde(default)]
    pub tab_separated: bool,
}

fn default_sizes() -> Vec<SubsetSize> {
    DEFAULT_SIZES.to_vec()
}
fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_seeds() -> Vec<u64> {
    vec![DEFAULT_SEED]
}
fn default_multiplicities() -> Vec<usize> {
    DEFAULT_MULTIPLICITIES.to_vec()
}
fn default_combined() -> Vec<usize> {
    DEFAULT_COMBINED_MULTIPLICITIES.to_vec()
}
fn default_probabilities() -> Vec<f64> {
    DEFAULT_PROBABILITIES.to_vec()
}
fn default_min_tokens() -> usize {
    DEFAULT_MIN_TOKENS
}
fn default_retry_budget() -> usize {
    3
}
fn default_backend() -> String {
    "identity".into()
}

impl Manifest {
    /// Parses a manifest and resolves its relative paths against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self, String> {
        let mut m: Manifest = toml::from_str(text).map_err(|e| e.to_string())?;
        let resolve = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base_dir.join(&*p);
            }
        };
        resolve(&mut m.train);
        resolve(&mut m.out_dir);
        for p in [&mut m.dev, &mut m.test, &mut m.lexicon, &mut m.cache].into_iter().flatten() {
            resolve(p);
        }
        let backend = m.backend_spec()?;
        if let BackendSpec::Dict { table } = backend {
            if table.is_relative() {
                m.backend = BackendSpec::Dict { table: base_dir.join(table) }.to_string();
            }
        }
        m.grid_spec()?.validate().map_err(|e| e.to_string())?;
        m.subset_spec().validate().map_err(|e| e.to_string())?;
        if m.augmenters.iter().any(|a| matches!(a, Method::Sr | Method::All)) && m.lexicon.is_none() {
            return Err("augmenters `sr` and `all` need a `lexicon`".into());
        }
        Ok(m)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let manifest_error = |reason: String| ExperimentError::Manifest {
            path: path.to_path_buf(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| manifest_error(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Manifest::from_toml(&text, base).map_err(manifest_error)
    }

    pub fn backend_spec(&self) -> Result<BackendSpec, String> {
        let mut spec: BackendSpec = self.backend.parse()?;
        if let (BackendSpec::Http(cfg), Some(extra)) = (&mut spec, &self.http) {
            *cfg = HttpBackendConfig {
                endpoint: cfg.endpoint.clone(),
                ..extra.clone()
            };
        }
        Ok(spec)
    }

    pub fn subset_spec(&self) -> SubsetSpec {
        SubsetSpec {
            sizes: self.sizes.clone(),
            seed: self.subset_seed,
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec, String> {
        Ok(GridSpec {
            augmenters: self.augmenters.clone(),
            multiplicities: self.multiplicities.clone(),
            combined_multiplicities: self.combined_multiplicities.clone(),
            probabilities: self.probabilities.clone(),
            sizes: self.sizes.clone(),
            seeds: self.seeds.clone(),
            base: AugmentationPlan {
                backend: self.backend.clone(),
                chain: self.chain.clone(),
                min_tokens: self.min_tokens,
                retry_budget: self.retry_budget,
                shuffle_mode: self.sis_mode,
                ..AugmentationPlan::default()
            },
        })
    }

    fn parse_options(&self) -> ParseOptions {
        ParseOptions {
            separator: if self.tab_separated {
                crate::corpus::ColumnSeparator::Tab
            } else {
                crate::corpus::ColumnSeparator::Whitespace
            },
            repair_iob: false,
        }
    }

    pub fn protected_paths(&self) -> Vec<PathBuf> {
        [Some(&self.train), self.dev.as_ref(), self.test.as_ref()]
            .into_iter()
            .flatten()
            .cloned()
            .collect()
    }
}

pub fn read_corpus(path: &Path, opts: &ParseOptions) -> Result<Corpus, ExperimentError> {
    let file = fs::File::open(path)?;
    parse_conll(BufReader::new(file), opts).map_err(|source| ExperimentError::Corpus {
        path: path.to_path_buf(),
        source,
    })
}

/// Executes every plan of a manifest in order. Each subset is also written
/// once as `<out_dir>/<dataset>/<subset>/original.conll`.
pub fn run_manifest(m: &Manifest) -> Result<Vec<PlanOutput>, ExperimentError> {
    let opts = m.parse_options();
    let train = read_corpus(&m.train, &opts)?;
    let subsets = subset(&train, &m.subset_spec())?;
    let plans = expand_grid(&m.grid_spec().map_err(ExperimentError::InvalidSpec)?)?;
    let lexicon = m.lexicon.as_deref().map(SynonymLexicon::from_path).transpose()?;
    let backend = m
        .backend_spec()
        .map_err(ExperimentError::InvalidSpec)?
        .build()?;
    let cache = match &m.cache {
        Some(path) => TranslationCache::open(path)?,
        None => TranslationCache::in_memory(),
    };
    let protected = m.protected_paths();
    let ctx = PlanContext {
        dataset: &m.dataset,
        out_dir: &m.out_dir,
        protected: &protected,
        lexicon: lexicon.as_ref(),
        backend: backend.as_ref(),
        cache: &cache,
    };
    for (size, corpus) in &subsets {
        let mut bytes = Vec::new();
        write_conll(corpus, &mut bytes)?;
        let path = m.out_dir.join(&m.dataset).join(size.to_string()).join("original.conll");
        write_atomic(&path, &bytes, &protected)?;
    }
    let mut outputs = Vec::with_capacity(plans.len());
    for plan in &plans {
        let out = execute_plan(plan, &subsets[&plan.subset], &ctx)?;
        log::info!("wrote {}", out.corpus_path.display());
        outputs.push(out);
    }
    Ok(outputs)
}
