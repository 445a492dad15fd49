//! `ner-augment` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid input data, 2 usage or I/O error,
//! 3 translation backend failure.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ner_augment::augment::{Method, ShuffleMode, SynonymLexicon};
use ner_augment::backtranslate::{BackendSpec, HttpBackendConfig, LanguageChain, TranslationCache, DEFAULT_AUTH_ENV};
use ner_augment::corpus::{
    compute_stats, parse_conll, validate_conll, write_conll, ColumnSeparator, Corpus, CorpusStats, ParseOptions,
};
use ner_augment::experiment::{
    expand_grid, run_manifest, subset, write_atomic, AugmentationPlan, ExperimentError, Manifest, SubsetSize,
    SubsetSpec, DEFAULT_SIZES,
};
use ner_augment::metrics::{diversity_report, run_report, SCHEMA_VERSION};
use ner_augment::pipeline::{augment_corpus, AugmentRequest};
use ner_augment::rng::{Probability, DEFAULT_SEED};
use ner_augment::segment::DEFAULT_MIN_TOKENS;

const EXIT_INVALID: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_BACKEND: u8 = 3;

#[derive(Parser)]
#[command(name = "ner-augment", version, about = "Data augmentation for CoNLL/IOB2 NER corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads; output does not depend on this value. Default: all cores.
    #[arg(long, short = 'j', global = true)]
    jobs: Option<usize>,

    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(long, short = 'v', global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Split columns on tabs only (default: any whitespace).
    #[arg(long, global = true)]
    tab_separated: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a corpus parses and follows IOB2.
    Validate(ValidateArgs),
    /// Print sentence, token, mention and entity-type counts.
    Stats(StatsArgs),
    /// Augment a corpus.
    Augment(Box<AugmentArgs>),
    /// Compare distinct-1 diversity of several corpora.
    Diversity(DiversityArgs),
    /// Draw nested low-resource subsets of a corpus.
    Subset(SubsetArgs),
    /// Run every plan of an experiment manifest.
    Grid(GridArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Corpus file, or `-` for stdin.
    #[arg(default_value = "-")]
    input: String,
    /// Rewrite `I-X` labels that do not continue an entity to `B-X` and write the result.
    #[arg(long)]
    repair_iob: bool,
    /// Where the repaired corpus goes (default stdout).
    #[arg(long, short = 'o', requires = "repair_iob")]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    /// Corpus file, or `-` for stdin.
    #[arg(default_value = "-")]
    input: String,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AugmentArgs {
    /// Corpus file, or `-` for stdin.
    #[arg(long, short = 'i', default_value = "-")]
    input: String,
    /// Output corpus (default stdout). Written only if the run succeeds.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
    /// Run report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    /// lwtr, sr, mr, sis, bt or all.
    #[arg(long, short = 'm')]
    method: Method,
    /// Replacement / translation probability.
    #[arg(long, default_value_t = 0.5, value_parser = parse_probability)]
    p: f64,
    /// Augmentations per sentence (per method for `all`).
    #[arg(long, short = 'n', default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// identity, dict:FILE or http:URL.
    #[arg(long, default_value = "identity")]
    backend: BackendSpec,
    /// Languages of the backtranslation chain, e.g. en-de-en or en-fr-de-en.
    #[arg(long, default_value = "en-de-en")]
    chain: LanguageChain,
    /// Append-only translation cache file.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Shortest context segment sent for translation.
    #[arg(long, default_value_t = DEFAULT_MIN_TOKENS)]
    min_tokens: usize,
    /// Synonym lexicon (`word<TAB>syn1|syn2` per line); needed by sr and all.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Redraws of an augmentation identical to its source before giving up.
    #[arg(long, default_value_t = 3)]
    retry_budget: usize,
    /// within-segments or segment-order.
    #[arg(long, default_value = "within-segments")]
    sis_mode: ShuffleMode,
    #[command(flatten)]
    http: HttpArgs,
}

#[derive(Args)]
struct HttpArgs {
    /// Header carrying the token for the HTTP backend, e.g. Authorization.
    #[arg(long)]
    http_auth_header: Option<String>,
    /// Environment variable holding the header value.
    #[arg(long, default_value = DEFAULT_AUTH_ENV)]
    http_auth_env: String,
    #[arg(long, default_value_t = 30_000)]
    http_timeout_ms: u64,
    #[arg(long, default_value_t = 32)]
    http_max_batch: usize,
    /// Retries of a failed request (timeouts, 429 and 5xx only).
    #[arg(long, default_value_t = 4)]
    http_retries: u32,
}

#[derive(Args)]
struct DiversityArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SubsetArgs {
    #[arg(long, short = 'i')]
    input: PathBuf,
    /// Comma-separated sizes; `all` is the whole corpus.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
    sizes: Vec<SubsetSize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Directory receiving `subset_<size>.conll` files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// TOML manifest.
    manifest: PathBuf,
    /// List the plans without running them.
    #[arg(long)]
    dry_run: bool,
}

fn parse_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    Probability::new(p).map(|p| p.get()).map_err(|e| e.to_string())
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code,
            error: error.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure::new(EXIT_USAGE, error)
    }
}

impl From<io::Error> for Failure {
    fn from(error: io::Error) -> Self {
        Failure::new(EXIT_USAGE, error)
    }
}

type CmdResult = Result<u8, Failure>;

fn parse_options(cli_tab: bool, repair_iob: bool) -> ParseOptions {
    ParseOptions {
        separator: if cli_tab {
            ColumnSeparator::Tab
        } else {
            ColumnSeparator::Whitespace
        },
        repair_iob,
    }
}

fn open_input(path: &str) -> Result<Box<dyn BufRead>, Failure> {
    if path == "-" {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).with_context(|| format!("cannot open {path}"))?;
    Ok(Box::new(BufReader::new(file)))
}

fn read_corpus(path: &str, opts: &ParseOptions) -> Result<Corpus, Failure> {
    parse_conll(open_input(path)?, opts).map_err(|e| match e {
        ner_augment::corpus::CorpusError::Io(e) => Failure::new(EXIT_USAGE, anyhow!("{path}: {e}")),
        e => Failure::new(EXIT_INVALID, anyhow!("{path}: {e}")),
    })
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match path {
        Some(path) => write_atomic(path, bytes, &[]).map_err(|e| Failure::new(EXIT_USAGE, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn conll_bytes(c: &Corpus) -> Vec<u8> {
    let mut buf = Vec::new();
    write_conll(c, &mut buf).expect("writing to memory");
    buf
}

fn cmd_validate(args: &ValidateArgs, tab: bool) -> CmdResult {
    let opts = parse_options(tab, false);
    let v = validate_conll(open_input(&args.input)?, &opts).map_err(|e| Failure::new(EXIT_USAGE, e))?;
    for issue in &v.issues {
        eprintln!("{}: {issue}", args.input);
    }
    eprintln!(
        "{}: {} sentences, {} issue{}",
        args.input,
        v.corpus.len(),
        v.issues.len(),
        if v.issues.len() == 1 { "" } else { "s" }
    );
    if args.repair_iob {
        if !v.is_repairable() {
            eprintln!("{}: only IOB2 transition errors can be repaired; nothing written", args.input);
            return Ok(EXIT_INVALID);
        }
        write_output(args.output.as_deref(), &conll_bytes(&v.corpus))?;
    }
    Ok(if v.is_valid() { 0 } else { EXIT_INVALID })
}

#[derive(Serialize)]
struct StatsDoc<'a> {
    schema_version: u32,
    path: &'a str,
    #[serde(flatten)]
    stats: CorpusStats,
}

fn cmd_stats(args: &StatsArgs, tab: bool) -> CmdResult {
    let corpus = read_corpus(&args.input, &parse_options(tab, false))?;
    let stats = compute_stats(&corpus);
    if args.json {
        let doc = StatsDoc {
            schema_version: SCHEMA_VERSION,
            path: &args.input,
            stats,
        };
        println!("{}", serde_json::to_string_pretty(&doc).expect("stats serialize"));
    } else {
        println!("sentences        {}", stats.n_sentences);
        println!("tokens           {}", stats.n_tokens);
        println!("mentions         {}", stats.n_mentions);
        println!("unique mentions  {}", stats.n_unique_mentions);
        println!("entity types     {}", stats.n_entity_types);
    }
    Ok(0)
}

fn backend_spec(args: &AugmentArgs) -> BackendSpec {
    match &args.backend {
        BackendSpec::Http(cfg) => BackendSpec::Http(HttpBackendConfig {
            endpoint: cfg.endpoint.clone(),
            auth_header: args.http.http_auth_header.clone(),
            auth_env: args.http.http_auth_env.clone(),
            timeout_ms: args.http.http_timeout_ms,
            max_batch: args.http.http_max_batch,
            max_retries: args.http.http_retries,
            ..HttpBackendConfig::default()
        }),
        other => other.clone(),
    }
}

fn cmd_augment(args: &AugmentArgs, tab: bool) -> CmdResult {
    let corpus = read_corpus(&args.input, &parse_options(tab, false))?;
    let lexicon = match &args.lexicon {
        Some(path) => Some(
            SynonymLexicon::from_path(path)
                .map_err(|e| Failure::new(EXIT_USAGE, anyhow!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let spec = backend_spec(args);
    let backend = spec.build().map_err(|e| Failure::new(EXIT_USAGE, anyhow!("backend {spec}: {e}")))?;
    let cache = match &args.cache {
        Some(path) => TranslationCache::open(path).map_err(|e| Failure::new(EXIT_USAGE, e))?,
        None => TranslationCache::in_memory(),
    };
    let p = Probability::new(args.p).expect("validated by the parser");
    let request = AugmentRequest {
        method: args.method,
        p,
        multiplicity: args.n,
        retry_budget: args.retry_budget,
        run_seed: args.seed,
        min_tokens: args.min_tokens,
        chain: args.chain.clone(),
        shuffle_mode: args.sis_mode,
        lexicon: lexicon.as_ref(),
        backend: backend.as_ref(),
        cache: &cache,
    };
    let outcome = augment_corpus(&corpus, &request).map_err(|e| Failure::new(EXIT_USAGE, e))?;

    let plan = AugmentationPlan {
        method: args.method,
        p,
        multiplicity: args.n,
        seed: args.seed,
        run_seed: args.seed,
        subset: SubsetSize::All,
        backend: spec.to_string(),
        chain: args.chain.clone(),
        min_tokens: args.min_tokens,
        retry_budget: args.retry_budget,
        shuffle_mode: args.sis_mode,
    };
    let report = run_report(&corpus, &outcome.corpus, &plan, &outcome.counters);
    if let Some(path) = &args.report {
        write_atomic(path, report.to_json().as_bytes(), &[]).map_err(|e| Failure::new(EXIT_USAGE, e))?;
    }
    if outcome.counters.failed > 0 {
        for e in &outcome.counters.errors {
            eprintln!("error: {e}");
        }
        eprintln!("backend failed for {} augmentations; no output written", outcome.counters.failed);
        return Ok(EXIT_BACKEND);
    }
    write_output(args.output.as_deref(), &conll_bytes(&outcome.corpus))?;
    log::info!("{report}");
    Ok(0)
}

#[derive(Serialize)]
struct DiversityRow {
    path: String,
    sentences: usize,
    macro_mean: f64,
    corpus_level: f64,
}

#[derive(Serialize)]
struct DiversityDoc {
    schema_version: u32,
    corpora: Vec<DiversityRow>,
}

fn cmd_diversity(args: &DiversityArgs, tab: bool) -> CmdResult {
    let opts = parse_options(tab, false);
    let mut rows = Vec::new();
    for path in &args.inputs {
        let name = path.display().to_string();
        let corpus = read_corpus(&name, &opts)?;
        let report = diversity_report(&corpus).map_err(|e| Failure::new(EXIT_INVALID, anyhow!("{name}: {e}")))?;
        rows.push(DiversityRow {
            path: name,
            sentences: corpus.len(),
            macro_mean: report.macro_mean,
            corpus_level: report.corpus_level,
        });
    }
    if args.json {
        let doc = DiversityDoc {
            schema_version: SCHEMA_VERSION,
            corpora: rows,
        };
        println!("{}", serde_json::to_string_pretty(&doc).expect("rows serialize"));
    } else {
        let width = rows.iter().map(|r| r.path.len()).max().unwrap_or(0).max(6);
        println!("{:width$}  {:>9}  {:>10}  {:>12}", "corpus", "sentences", "distinct-1", "corpus-level");
        for r in &rows {
            println!(
                "{:width$}  {:>9}  {:>10.4}  {:>12.4}",
                r.path, r.sentences, r.macro_mean, r.corpus_level
            );
        }
    }
    Ok(0)
}

fn experiment_failure(e: ExperimentError) -> Failure {
    let code = match &e {
        ExperimentError::Corpus { .. } | ExperimentError::SubsetTooLarge { .. } => EXIT_INVALID,
        ExperimentError::Backend(_) => EXIT_BACKEND,
        _ => EXIT_USAGE,
    };
    Failure::new(code, e)
}

fn cmd_subset(args: &SubsetArgs, tab: bool) -> CmdResult {
    let name = args.input.display().to_string();
    let corpus = read_corpus(&name, &parse_options(tab, false))?;
    let spec = SubsetSpec {
        sizes: args.sizes.clone(),
        seed: args.seed,
    };
    let subsets = subset(&corpus, &spec).map_err(experiment_failure)?;
    let protected = [args.input.clone()];
    for (size, c) in &subsets {
        let path = args.out_dir.join(format!("subset_{size}.conll"));
        write_atomic(&path, &conll_bytes(c), &protected).map_err(experiment_failure)?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn cmd_grid(args: &GridArgs) -> CmdResult {
    let manifest = Manifest::from_path(&args.manifest).map_err(experiment_failure)?;
    if args.dry_run {
        let grid = manifest.grid_spec().map_err(|e| Failure::new(EXIT_USAGE, anyhow!(e)))?;
        let plans = expand_grid(&grid).map_err(experiment_failure)?;
        for plan in &plans {
            println!("{}/{}", plan.subset, plan.file_stem());
        }
        eprintln!("{} plans", plans.len());
        return Ok(0);
    }
    let outputs = run_manifest(&manifest).map_err(experiment_failure)?;
    let mut failed = false;
    for out in &outputs {
        println!("{}", out.corpus_path.display());
        if out.report.counts.failed > 0 {
            failed = true;
            eprintln!(
                "{}: backend failed for {} augmentations",
                out.corpus_path.display(),
                out.report.counts.failed
            );
        }
    }
    Ok(if failed { EXIT_BACKEND } else { 0 })
}

fn run(cli: &Cli) -> CmdResult {
    let tab = cli.tab_separated;
    match &cli.command {
        Command::Validate(a) => cmd_validate(a, tab),
        Command::Stats(a) => cmd_stats(a, tab),
        Command::Augment(a) => cmd_augment(a, tab),
        Command::Diversity(a) => cmd_diversity(a, tab),
        Command::Subset(a) => cmd_subset(a, tab),
        Command::Grid(a) => cmd_grid(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        pool = pool.num_threads(jobs);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
