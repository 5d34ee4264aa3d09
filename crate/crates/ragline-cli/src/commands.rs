//! The six pipeline commands. Flags override the loaded configuration;
//! everything a command prints in `--json` mode matches the corresponding
//! schema under `schemas/`.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use ragline::chunker::{split_page, Chunk, LengthFn, SplitterConfig, WordPieceCounter};
use ragline::corpus::{load_corpus, CorpusLoad, SourceDocument};
use ragline::embedder::{embed_batch, EmbedderConfig, EmbedderProvider};
use ragline::evaluator::{
    accuracy_table, compare_models, read_grades, read_reference_stats, render_accuracy_tsv,
    render_comparison_tsv, ComparisonReport, ScoreReport,
};
use ragline::generator::{
    append_record, assemble_prompt, generate, GenerationConfig, GenerationMode, ModelFamily,
    PromptTemplate, RemoteProvider, StubProvider,
};
use ragline::retriever::{
    evaluate_retrieval, read_eval_cases, retrieve, RetrievalConfig,
};
use ragline::vector_store::{Metric, VectorRecord, VectorStore};

use crate::config::PipelineConfig;
use crate::lock::IndexLock;
use crate::CliError;

// ---------------------------------------------------------------------------
// Flag enums (clap-facing mirrors of the library enums)

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LengthFnArg {
    Chars,
    Tokens,
}

impl From<LengthFnArg> for LengthFn {
    fn from(value: LengthFnArg) -> Self {
        match value {
            LengthFnArg::Chars => LengthFn::Chars,
            LengthFnArg::Tokens => LengthFn::Tokens,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MetricArg {
    Cosine,
    Euclidean,
    Dot,
}

impl From<MetricArg> for Metric {
    fn from(value: MetricArg) -> Self {
        match value {
            MetricArg::Cosine => Metric::Cosine,
            MetricArg::Euclidean => Metric::Euclidean,
            MetricArg::Dot => Metric::Dot,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EmbedderArg {
    Hash,
    Remote,
}

impl From<EmbedderArg> for EmbedderProvider {
    fn from(value: EmbedderArg) -> Self {
        match value {
            EmbedderArg::Hash => EmbedderProvider::Hash,
            EmbedderArg::Remote => EmbedderProvider::Remote,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Rag,
    Bare,
}

impl From<ModeArg> for GenerationMode {
    fn from(value: ModeArg) -> Self {
        match value {
            ModeArg::Rag => GenerationMode::Rag,
            ModeArg::Bare => GenerationMode::Bare,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ChatProviderArg {
    Stub,
    Remote,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    GptLike,
    LlamaLike,
    Stub,
}

impl From<FamilyArg> for ModelFamily {
    fn from(value: FamilyArg) -> Self {
        match value {
            FamilyArg::GptLike => ModelFamily::GptLike,
            FamilyArg::LlamaLike => ModelFamily::LlamaLike,
            FamilyArg::Stub => ModelFamily::Stub,
        }
    }
}

// ---------------------------------------------------------------------------
// Shared flag groups and helpers

#[derive(Debug, Args)]
pub struct SplitterFlags {
    /// Maximum chunk size in length units.
    #[arg(long)]
    chunk_size: Option<usize>,
    /// Overlap carried between adjacent chunks, in length units.
    #[arg(long)]
    overlap: Option<usize>,
    /// Unit of length: characters or counted tokens.
    #[arg(long, value_enum)]
    length_fn: Option<LengthFnArg>,
}

impl SplitterFlags {
    fn apply(&self, mut splitter: SplitterConfig) -> SplitterConfig {
        if let Some(chunk_size) = self.chunk_size {
            splitter.chunk_size = chunk_size;
        }
        if let Some(overlap) = self.overlap {
            splitter.overlap = overlap;
        }
        if let Some(length_fn) = self.length_fn {
            splitter.length_fn = length_fn.into();
        }
        splitter
    }
}

#[derive(Debug, Args)]
pub struct EmbedderFlags {
    /// Embedding provider.
    #[arg(long = "embedder", value_enum)]
    embedder: Option<EmbedderArg>,
    /// Remote embedding model identifier.
    #[arg(long)]
    embed_model: Option<String>,
    /// Embedding dimension.
    #[arg(long)]
    dim: Option<usize>,
    /// Hash-embedder seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Remote embeddings endpoint root (e.g. https://host/v1).
    #[arg(long)]
    embed_base_url: Option<String>,
}

impl EmbedderFlags {
    fn apply(&self, mut embedder: EmbedderConfig) -> EmbedderConfig {
        if let Some(provider) = self.embedder {
            embedder.provider = provider.into();
        }
        if let Some(model) = &self.embed_model {
            embedder.model_id = model.clone();
        }
        if let Some(dim) = self.dim {
            embedder.dim = dim;
        }
        if let Some(seed) = self.seed {
            embedder.seed = seed;
        }
        if let Some(base_url) = &self.embed_base_url {
            embedder.base_url = Some(base_url.clone());
        }
        embedder
    }
}

fn corpus_dir<'a>(config: &'a PipelineConfig, flag: &'a Option<PathBuf>) -> &'a Path {
    flag.as_deref().unwrap_or(&config.corpus_dir)
}

fn index_dir<'a>(config: &'a PipelineConfig, flag: &'a Option<PathBuf>) -> &'a Path {
    flag.as_deref().unwrap_or(&config.index_dir)
}

/// Load the corpus, failing with per-file diagnostics when any document is
/// unreadable.
fn load_corpus_strict(dir: &Path) -> Result<CorpusLoad, CliError> {
    let load = load_corpus(dir, None)?;
    if !load.failures.is_empty() {
        for (path, error) in &load.failures {
            eprintln!("{}: {error}", path.display());
        }
        return Err(CliError::Input(format!(
            "{} of {} documents failed to load from {}",
            load.failures.len(),
            load.failures.len() + load.documents.len(),
            dir.display()
        )));
    }
    Ok(load)
}

/// Split every page of every document, in document order.
fn split_corpus(
    documents: &[SourceDocument],
    splitter: &SplitterConfig,
) -> Result<Vec<Chunk>, CliError> {
    let counter = WordPieceCounter;
    let mut chunks = Vec::new();
    for doc in documents {
        for page in &doc.pages {
            chunks.extend(split_page(
                &doc.doc_id,
                page.page_no,
                &page.text,
                splitter,
                &counter,
            )?);
        }
    }
    Ok(chunks)
}

/// Embed chunks and assemble index records carrying doc/title/page
/// metadata for citations and retrieval scoring.
fn build_records(
    documents: &[SourceDocument],
    chunks: &[Chunk],
    embedder: &EmbedderConfig,
) -> Result<Vec<VectorRecord>, CliError> {
    let titles: BTreeMap<&str, &str> = documents
        .iter()
        .map(|doc| (doc.doc_id.as_str(), doc.title.as_str()))
        .collect();
    let texts: Vec<String> = chunks.iter().map(|c| c.text.clone()).collect();
    let vectors = embed_batch(&texts, embedder)?;
    Ok(chunks
        .iter()
        .zip(vectors)
        .map(|(chunk, vector)| VectorRecord {
            id: chunk.chunk_id.clone(),
            vector,
            metadata: BTreeMap::from([
                ("doc_id".to_string(), chunk.doc_id.clone()),
                ("title".to_string(), titles[chunk.doc_id.as_str()].to_string()),
                ("page_no".to_string(), chunk.page_no.to_string()),
            ]),
            text: chunk.text.clone(),
        })
        .collect())
}

fn load_store(dir: &Path) -> Result<VectorStore, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Input(format!(
            "no index found at {} (run `ragline index` first)",
            dir.display()
        )));
    }
    Ok(VectorStore::load(dir)?)
}

fn print_json<T: Serialize>(value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Input(format!("serializing output: {e}")))?;
    println!("{text}");
    Ok(())
}

// ---------------------------------------------------------------------------
// ingest

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Corpus directory to load.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    /// Chunk dump destination (default: <index_dir>/chunks.jsonl).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Index directory (locates the default chunk dump).
    #[arg(long)]
    index_dir: Option<PathBuf>,
    #[command(flatten)]
    splitter: SplitterFlags,
    /// Emit the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize)]
struct HistogramBucket {
    lo: usize,
    hi: usize,
    count: usize,
}

#[derive(Debug, Serialize)]
struct IngestSummary {
    docs: usize,
    pages: usize,
    chunks: usize,
    skipped: usize,
    chunk_dump: String,
    histogram: Vec<HistogramBucket>,
}

fn unit_histogram(chunks: &[Chunk], chunk_size: usize) -> Vec<HistogramBucket> {
    let buckets = 10usize;
    let width = chunk_size.div_ceil(buckets).max(1);
    let mut histogram: Vec<HistogramBucket> = (0..buckets)
        .map(|i| HistogramBucket {
            lo: i * width,
            hi: (i + 1) * width,
            count: 0,
        })
        .collect();
    for chunk in chunks {
        let idx = (chunk.unit_len / width).min(buckets - 1);
        histogram[idx].count += 1;
    }
    histogram
}

pub fn ingest(config: &PipelineConfig, args: IngestArgs) -> Result<(), CliError> {
    let splitter = args.splitter.apply(config.splitter.clone());
    let corpus = corpus_dir(config, &args.corpus_dir);
    let index = index_dir(config, &args.index_dir);
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| index.join("chunks.jsonl"));

    let _lock = IndexLock::acquire(index)?;
    let load = load_corpus_strict(corpus)?;
    let chunks = split_corpus(&load.documents, &splitter)?;

    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(&out)?);
    for chunk in &chunks {
        let line = serde_json::to_string(chunk)
            .map_err(|e| CliError::Input(format!("serializing chunk: {e}")))?;
        writeln!(file, "{line}")?;
    }
    file.flush()?;

    let summary = IngestSummary {
        docs: load.documents.len(),
        pages: load.documents.iter().map(|d| d.pages.len()).sum(),
        chunks: chunks.len(),
        skipped: load.skipped.len(),
        chunk_dump: out.display().to_string(),
        histogram: unit_histogram(&chunks, splitter.chunk_size),
    };

    if args.json {
        print_json(&summary)?;
    } else {
        println!(
            "{} docs, {} pages, {} chunks -> {}",
            summary.docs, summary.pages, summary.chunks, summary.chunk_dump
        );
        println!("chunk sizes ({:?} units):", splitter.length_fn);
        for bucket in &summary.histogram {
            if bucket.count > 0 {
                println!("  [{:>5}, {:>5}): {}", bucket.lo, bucket.hi, bucket.count);
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// index

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Corpus directory to index.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    /// Destination index directory.
    #[arg(long)]
    index_dir: Option<PathBuf>,
    /// Similarity metric recorded for the index.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    #[command(flatten)]
    splitter: SplitterFlags,
    #[command(flatten)]
    embedder: EmbedderFlags,
    /// Emit the summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize)]
struct IndexSummary {
    docs: usize,
    chunks: usize,
    dim: usize,
    metric: Metric,
    embedder_fingerprint: String,
    index_dir: String,
}

pub fn index(config: &PipelineConfig, args: IndexArgs) -> Result<(), CliError> {
    let splitter = args.splitter.apply(config.splitter.clone());
    let embedder = args.embedder.apply(config.embedder.clone());
    let metric = args.metric.map(Metric::from).unwrap_or(config.retrieval.metric);
    let corpus = corpus_dir(config, &args.corpus_dir);
    let index = index_dir(config, &args.index_dir);

    let _lock = IndexLock::acquire(index)?;
    let load = load_corpus_strict(corpus)?;
    let chunks = split_corpus(&load.documents, &splitter)?;
    let records = build_records(&load.documents, &chunks, &embedder)?;

    let mut store = VectorStore::new(embedder.dim, metric, embedder.fingerprint());
    store.upsert(records)?;

    // Build into a scratch directory, then swap it in, so a rebuild either
    // fully replaces the old index or leaves it untouched.
    let build_dir = index.with_file_name(format!(
        "{}.build-{}",
        index.file_name().and_then(|n| n.to_str()).unwrap_or("index"),
        std::process::id()
    ));
    let swap = (|| -> Result<(), CliError> {
        std::fs::create_dir_all(&build_dir)?;
        store.save(&build_dir)?;
        if index.exists() {
            let old_dir = index.with_file_name(format!(
                "{}.old-{}",
                index.file_name().and_then(|n| n.to_str()).unwrap_or("index"),
                std::process::id()
            ));
            std::fs::rename(index, &old_dir)?;
            std::fs::rename(&build_dir, index)?;
            std::fs::remove_dir_all(&old_dir)?;
        } else {
            std::fs::rename(&build_dir, index)?;
        }
        Ok(())
    })();
    if swap.is_err() {
        let _ = std::fs::remove_dir_all(&build_dir);
    }
    swap?;

    let summary = IndexSummary {
        docs: load.documents.len(),
        chunks: chunks.len(),
        dim: embedder.dim,
        metric,
        embedder_fingerprint: embedder.fingerprint(),
        index_dir: index.display().to_string(),
    };
    if args.json {
        print_json(&summary)?;
    } else {
        println!(
            "indexed {} chunks from {} docs into {} (dim {}, fingerprint {})",
            summary.chunks, summary.docs, summary.index_dir, summary.dim, summary.embedder_fingerprint
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// query

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Query text.
    query: String,
    /// Index directory to search.
    #[arg(long)]
    index_dir: Option<PathBuf>,
    /// Number of results.
    #[arg(long)]
    k: Option<usize>,
    /// Similarity metric for scoring.
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    #[command(flatten)]
    embedder: EmbedderFlags,
    /// Emit the full context bundle as JSON.
    #[arg(long)]
    json: bool,
}

/// Whitespace-flattened preview of chunk text for one-line output.
fn preview(text: &str, max_chars: usize) -> String {
    let flat: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= max_chars {
        flat
    } else {
        let cut: String = flat.chars().take(max_chars).collect();
        format!("{cut}…")
    }
}

pub fn query(config: &PipelineConfig, args: QueryArgs) -> Result<(), CliError> {
    let embedder = args.embedder.apply(config.embedder.clone());
    let retrieval = RetrievalConfig {
        k: args.k.unwrap_or(config.retrieval.k),
        metric: args.metric.map(Metric::from).unwrap_or(config.retrieval.metric),
    };
    let store = load_store(index_dir(config, &args.index_dir))?;
    let bundle = retrieve(&args.query, &store, &embedder, &retrieval)?;

    if args.json {
        print_json(&bundle)?;
    } else {
        for (rank, result) in bundle.results.iter().enumerate() {
            let title = result
                .metadata
                .get("title")
                .or(result.metadata.get("doc_id"))
                .unwrap_or(&result.id);
            let page = result.metadata.get("page_no").map(String::as_str).unwrap_or("?");
            println!(
                "{}. {:.4} [{}, p.{}] {}",
                rank + 1,
                result.score,
                title,
                page,
                preview(&result.text, 72)
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// ask

#[derive(Debug, Args)]
pub struct AskArgs {
    /// File containing the clinical scenario text.
    scenario_file: PathBuf,
    /// Grounding mode: retrieve context (rag) or prompt bare.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Completion provider.
    #[arg(long, value_enum, default_value = "stub")]
    provider: ChatProviderArg,
    /// Index directory for rag mode.
    #[arg(long)]
    index_dir: Option<PathBuf>,
    /// Number of chunks to ground on.
    #[arg(long)]
    k: Option<usize>,
    /// Chat model identifier.
    #[arg(long)]
    model_id: Option<String>,
    /// Model family (sets the default sampling temperature).
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Sampling temperature override.
    #[arg(long)]
    temperature: Option<f64>,
    /// Completion token cap.
    #[arg(long)]
    max_tokens: Option<u32>,
    /// Remote chat endpoint root.
    #[arg(long)]
    chat_base_url: Option<String>,
    /// Prompt template file (defaults to the built-in template).
    #[arg(long)]
    template: Option<PathBuf>,
    /// Generation log to append to.
    #[arg(long, default_value = "generations.jsonl")]
    log: PathBuf,
    #[command(flatten)]
    embedder: EmbedderFlags,
    /// Emit the full generation record as JSON.
    #[arg(long)]
    json: bool,
}

pub fn ask(config: &PipelineConfig, args: AskArgs) -> Result<(), CliError> {
    let scenario = std::fs::read_to_string(&args.scenario_file).map_err(|e| {
        CliError::Input(format!("reading {}: {e}", args.scenario_file.display()))
    })?;
    if scenario.trim().is_empty() {
        return Err(CliError::Input(format!(
            "scenario file {} is empty",
            args.scenario_file.display()
        )));
    }

    let mut generation: GenerationConfig = config.generation.clone();
    if let Some(mode) = args.mode {
        generation.mode = mode.into();
    }
    if let Some(model_id) = &args.model_id {
        generation.model_id = model_id.clone();
    }
    if let Some(family) = args.family {
        generation.family = family.into();
    }
    if let Some(temperature) = args.temperature {
        generation.temperature = Some(temperature);
    }
    if let Some(max_tokens) = args.max_tokens {
        generation.max_tokens = Some(max_tokens);
    }
    if let Some(base_url) = &args.chat_base_url {
        generation.base_url = Some(base_url.clone());
    }

    let template = match args.template.as_ref().or(config.template.as_ref()) {
        Some(path) => PromptTemplate::load(path)?,
        None => PromptTemplate::default(),
    };

    let bundle = match generation.mode {
        GenerationMode::Rag => {
            let embedder = args.embedder.apply(config.embedder.clone());
            let retrieval = RetrievalConfig {
                k: args.k.unwrap_or(config.retrieval.k),
                metric: config.retrieval.metric,
            };
            let store = load_store(index_dir(config, &args.index_dir))?;
            Some(retrieve(&scenario, &store, &embedder, &retrieval)?)
        }
        GenerationMode::Bare => None,
    };

    let messages = assemble_prompt(&scenario, bundle.as_ref(), &template, &generation)?;
    let context_ids: Vec<String> = bundle
        .as_ref()
        .map(|b| b.results.iter().map(|r| r.id.clone()).collect())
        .unwrap_or_default();

    let scenario_id = args
        .scenario_file
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();

    let record = match args.provider {
        ChatProviderArg::Stub => generate(
            messages,
            &generation,
            &StubProvider,
            &scenario_id,
            context_ids,
        )?,
        ChatProviderArg::Remote => {
            let base_url = generation.base_url.clone().ok_or_else(|| {
                CliError::Input(
                    "remote provider needs a chat endpoint (--chat-base-url or [generation] base_url)"
                        .to_string(),
                )
            })?;
            let provider = RemoteProvider::new(base_url);
            generate(messages, &generation, &provider, &scenario_id, context_ids)?
        }
    };

    append_record(&args.log, &record)?;

    if args.json {
        print_json(&record)?;
    } else {
        println!("{}", record.completion);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// score

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// Grades CSV (model_id,scenario_id,replicate_id,category,grade).
    grades_csv: PathBuf,
    /// Compare two models: accuracy, effect sizes, and chi-square per category.
    #[arg(long, num_args = 2, value_names = ["MODEL_A", "MODEL_B"])]
    compare: Option<Vec<String>>,
    /// Reference statistics JSON for side-by-side comparison columns.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Emit the full report as JSON.
    #[arg(long)]
    json: bool,
}

pub fn score(_config: &PipelineConfig, args: ScoreArgs) -> Result<(), CliError> {
    let grades = read_grades(&args.grades_csv)?;
    let accuracy = accuracy_table(&grades)?;

    let comparison = match &args.compare {
        Some(models) => {
            let rows = compare_models(&grades, &models[0], &models[1])?;
            Some(ComparisonReport {
                model_a: models[0].clone(),
                model_b: models[1].clone(),
                rows,
            })
        }
        None => None,
    };

    if args.json {
        let report = ScoreReport { accuracy, comparison };
        print_json(&report)?;
        return Ok(());
    }

    print!("{}", render_accuracy_tsv(&accuracy));
    if let Some(comparison) = &comparison {
        let reference = match &args.reference {
            Some(path) => Some(read_reference_stats(path)?),
            None => None,
        };
        println!();
        println!("{} vs {}", comparison.model_a, comparison.model_b);
        print!(
            "{}",
            render_comparison_tsv(&comparison.rows, reference.as_deref())
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Retrieval evaluation cases (JSONL of {query, relevant_doc_ids}).
    eval_cases: PathBuf,
    /// Chunk sizes to try.
    #[arg(long = "chunk-sizes", value_delimiter = ',', num_args = 1..)]
    chunk_sizes: Option<Vec<usize>>,
    /// Values of k to try.
    #[arg(long = "k", value_delimiter = ',', num_args = 1..)]
    k: Option<Vec<usize>>,
    /// Corpus directory to index for the sweep.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
    #[command(flatten)]
    embedder: EmbedderFlags,
    /// Emit the grid as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Serialize)]
struct SweepRow {
    chunk_size: usize,
    k: usize,
    hit_rate_at_k: f64,
    mrr: f64,
    mean_top_score: f64,
    best: bool,
}

#[derive(Debug, Serialize)]
struct SweepReport {
    rows: Vec<SweepRow>,
}

pub fn sweep(config: &PipelineConfig, args: SweepArgs) -> Result<(), CliError> {
    let chunk_sizes = args
        .chunk_sizes
        .clone()
        .unwrap_or_else(|| vec![config.splitter.chunk_size]);
    let ks = args.k.clone().unwrap_or_else(|| vec![config.retrieval.k]);
    if chunk_sizes.is_empty() || ks.is_empty() {
        return Err(CliError::Input("empty sweep grid".to_string()));
    }

    let cases = read_eval_cases(&args.eval_cases)?;
    let embedder = args.embedder.apply(config.embedder.clone());
    let load = load_corpus_strict(corpus_dir(config, &args.corpus_dir))?;

    let mut rows = Vec::with_capacity(chunk_sizes.len() * ks.len());
    for &chunk_size in &chunk_sizes {
        let splitter = SplitterConfig {
            chunk_size,
            ..config.splitter.clone()
        };
        let chunks = split_corpus(&load.documents, &splitter)?;
        let records = build_records(&load.documents, &chunks, &embedder)?;
        let mut store = VectorStore::new(embedder.dim, config.retrieval.metric, embedder.fingerprint());
        store.upsert(records)?;

        for &k in &ks {
            let retrieval = RetrievalConfig {
                k,
                metric: config.retrieval.metric,
            };
            let metrics = evaluate_retrieval(&cases, &store, &embedder, &retrieval)?;
            rows.push(SweepRow {
                chunk_size,
                k,
                hit_rate_at_k: metrics.hit_rate_at_k,
                mrr: metrics.mrr,
                mean_top_score: metrics.mean_top_score,
                best: false,
            });
        }
    }

    // Best cell: highest hit rate, ties broken by mrr, then grid order.
    let best = rows
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            (a.hit_rate_at_k, a.mrr, std::cmp::Reverse(*ia))
                .partial_cmp(&(b.hit_rate_at_k, b.mrr, std::cmp::Reverse(*ib)))
                .expect("metrics are finite")
        })
        .map(|(i, _)| i);
    if let Some(best) = best {
        rows[best].best = true;
    }

    if args.json {
        print_json(&SweepReport { rows })?;
    } else {
        println!("chunk_size\tk\thit_rate@k\tmrr\tmean_top_score");
        for row in &rows {
            println!(
                "{}\t{}\t{:.4}\t{:.4}\t{:.4}{}",
                row.chunk_size,
                row.k,
                row.hit_rate_at_k,
                row.mrr,
                row.mean_top_score,
                if row.best { "\t*" } else { "" }
            );
        }
    }
    Ok(())
}
