//! Command-line interface: ingest, index, rank, baselines, pooling and
//! evaluation behind one binary.
//!
//! Exit codes: 0 on success, 1 for refused operations (existing output
//! without `--force`), 2 for usage and input errors.

use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::baselines::{linker_baseline, sentence_retrieval_baseline};
use crate::data::{
    gather_candidate_contexts, load_entities, AnnotationStore, Catalog, ContextStore, EntityQuery,
};
use crate::embedding::EmbeddingTable;
use crate::error::Error;
use crate::eval::{evaluate_runs, pool_top_k, render_text, Partition, Qrels};
use crate::index::{Bm25Params, InvertedIndex};
use crate::pipeline::{
    rank_entity, CcrVariant, ContextRanking, PipelineConfig, SerVariant, Stores,
};
use crate::trec::{format_run, read_run, RunData};

/// Environment variable naming the default data directory used to resolve
/// store paths when their flags are omitted.
pub const DATA_DIR_ENV: &str = "TAILRANK_DATA";

/// A CLI failure together with its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// The operation was refused (exit code 1).
    Refused(String),
    /// Usage or input error (exit code 2).
    Failed(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Refused(_) => 1,
            CliError::Failed(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Refused(msg) => write!(f, "refused: {msg}"),
            CliError::Failed(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failed(e)
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "tailrank",
    version,
    about = "Rank the sentences mentioning a long-tail entity, run baselines, pool and evaluate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build an inverted index over a catalog or a context store and
    /// snapshot it to disk.
    Index(IndexArgs),
    /// Rank candidate contexts for every entity in a query file.
    Rank(RankArgs),
    /// Run a comparison system over the same candidate sets.
    Baseline(BaselineArgs),
    /// Pool the top-k contexts of several runs into an assessment sheet.
    Pool(PoolArgs),
    /// Score runs against qrels with MAP/MRR and significance markers.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Catalog record file; the index covers opening_text.
    #[arg(long, conflicts_with = "contexts")]
    pub catalog: Option<PathBuf>,
    /// Context record file; the index covers the sentence text.
    #[arg(long)]
    pub contexts: Option<PathBuf>,
    /// Snapshot output path.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Overwrite an existing snapshot.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SerArg {
    Basic,
    Pop,
    Types,
}

impl From<SerArg> for SerVariant {
    fn from(v: SerArg) -> Self {
        match v {
            SerArg::Basic => SerVariant::Basic,
            SerArg::Pop => SerVariant::Pop,
            SerArg::Types => SerVariant::Types,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CcrArg {
    Retrieval,
    Semantic,
}

impl From<CcrArg> for CcrVariant {
    fn from(v: CcrArg) -> Self {
        match v {
            CcrArg::Retrieval => CcrVariant::Retrieval,
            CcrArg::Semantic => CcrVariant::Semantic,
        }
    }
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Long-tail entity query file (defaults to $TAILRANK_DATA/entities.jsonl).
    #[arg(long)]
    pub entities: Option<PathBuf>,
    /// Catalog record file (defaults to $TAILRANK_DATA/catalog.jsonl).
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    /// Context record file (defaults to $TAILRANK_DATA/contexts.jsonl).
    #[arg(long)]
    pub contexts: Option<PathBuf>,
    /// Annotation record file (defaults to $TAILRANK_DATA/annotations.jsonl).
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    /// Word embedding table (defaults to $TAILRANK_DATA/embeddings.txt).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub stores: StoreArgs,
    /// Support entity ranking variant.
    #[arg(long, value_enum, default_value = "basic")]
    pub ser: SerArg,
    /// Support entity cutoff (N).
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Support contexts per support entity (M).
    #[arg(long, default_value_t = 50)]
    pub m: usize,
    /// Context-to-context scoring variant.
    #[arg(long, value_enum, default_value = "semantic")]
    pub ccr: CcrArg,
    /// Link-confidence threshold for support contexts.
    #[arg(long, default_value_t = 0.9)]
    pub theta: f64,
    /// BM25 k1.
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,
    /// BM25 b.
    #[arg(long, default_value_t = 0.8)]
    pub b: f64,
    /// Candidate context cap per entity.
    #[arg(long, default_value_t = 5000)]
    pub cap: usize,
    /// Run tag; defaults to the configuration encoding.
    #[arg(long)]
    pub tag: Option<String>,
    /// Produce every configuration of the variant/cutoff grid; OUT is a
    /// directory.
    #[arg(long)]
    pub grid: bool,
    /// Run file output path (a directory with --grid).
    #[arg(short, long)]
    pub out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
    /// Worker threads for per-entity scoring.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    /// BM25 over the candidate contexts, queried with the description.
    Sentence,
    /// Confidence of the entity's own link annotations.
    Linker,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[command(flatten)]
    pub stores: StoreArgs,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    /// Confidence threshold for the linker method.
    #[arg(long, default_value_t = 0.9)]
    pub theta: f64,
    /// BM25 k1 for the sentence method.
    #[arg(long, default_value_t = 1.2)]
    pub k1: f64,
    /// BM25 b for the sentence method.
    #[arg(long, default_value_t = 0.8)]
    pub b: f64,
    /// Candidate context cap per entity.
    #[arg(long, default_value_t = 5000)]
    pub cap: usize,
    /// Run tag; defaults to the method name.
    #[arg(long)]
    pub tag: Option<String>,
    /// Run file output path.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Overwrite an existing run file.
    #[arg(long)]
    pub force: bool,
    /// Worker threads for per-entity scoring.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PoolArgs {
    /// Depth of the per-run pools.
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Append the sentence text from this context store to each pooled
    /// pair.
    #[arg(long)]
    pub contexts: Option<PathBuf>,
    /// Assessment sheet output path.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Overwrite an existing sheet.
    #[arg(long)]
    pub force: bool,
    /// Run files to pool.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Qrels file: `entity_id 0 context_id rel`.
    #[arg(long)]
    pub qrels: PathBuf,
    /// Entity partition file (`entity_id label`) for subset blocks.
    #[arg(long)]
    pub subset: Option<PathBuf>,
    /// Run tag significance is tested against; defaults to the first run.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Report output prefix; writes <prefix>.txt and <prefix>.json.
    #[arg(short, long)]
    pub out: Option<PathBuf>,
    /// Overwrite existing reports.
    #[arg(long)]
    pub force: bool,
    /// Run files to evaluate.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
}

/// Digest of one input file recorded in a run manifest.
#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// Configuration block of a run manifest.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ManifestConfig {
    Pipeline {
        ser: String,
        n: usize,
        m: usize,
        ccr: String,
        theta: f64,
        k1: f64,
        b: f64,
        candidate_cap: usize,
    },
    Baseline {
        method: String,
        theta: Option<f64>,
        k1: f64,
        b: f64,
        candidate_cap: usize,
    },
}

/// Written next to every run file. The timestamp is informational and not
/// part of any checksum.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub run_tag: String,
    pub config: ManifestConfig,
    pub inputs: BTreeMap<String, FileDigest>,
    pub output: String,
    pub created_utc: String,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Index(args) => cmd_index(args),
        Command::Rank(args) => cmd_rank(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Pool(args) => cmd_pool(args),
        Command::Eval(args) => cmd_eval(args),
    }
}

fn resolve_path(flag: Option<PathBuf>, default_name: &str) -> CliResult<PathBuf> {
    if let Some(p) = flag {
        return Ok(p);
    }
    if let Ok(dir) = std::env::var(DATA_DIR_ENV) {
        return Ok(PathBuf::from(dir).join(default_name));
    }
    Err(CliError::Failed(Error::Usage(format!(
        "no path for {default_name}; pass the flag or set {DATA_DIR_ENV}"
    ))))
}

fn refuse_existing(path: &Path, force: bool) -> CliResult<()> {
    if path.exists() && !force {
        return Err(CliError::Refused(format!(
            "{} exists; pass --force to overwrite",
            path.display()
        )));
    }
    Ok(())
}

/// Write-temp-then-rename so partial output never lands at the target.
fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(|e| Error::io(path, e))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn sha256_file(path: &Path) -> CliResult<String> {
    let mut file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 8192];
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

fn digest_inputs(paths: &[(&str, &Path)]) -> CliResult<BTreeMap<String, FileDigest>> {
    let mut out = BTreeMap::new();
    for (label, path) in paths {
        out.insert(
            label.to_string(),
            FileDigest {
                path: path.display().to_string(),
                sha256: sha256_file(path)?,
            },
        );
    }
    Ok(out)
}

fn write_manifest(
    run_path: &Path,
    manifest_path: &Path,
    tag: &str,
    config: ManifestConfig,
    inputs: BTreeMap<String, FileDigest>,
) -> CliResult<()> {
    let manifest = RunManifest {
        run_tag: tag.to_string(),
        config,
        inputs,
        output: run_path.display().to_string(),
        created_utc: chrono::Utc::now().to_rfc3339(),
    };
    let mut body = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Usage(format!("manifest serialization failed: {e}")))?;
    body.push('\n');
    write_atomic(manifest_path, body.as_bytes())
}

fn build_thread_pool(jobs: Option<usize>) -> CliResult<Option<rayon::ThreadPool>> {
    match jobs {
        None => Ok(None),
        Some(0) => Err(CliError::Failed(Error::Usage("--jobs must be >= 1".into()))),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(Some)
            .map_err(|e| CliError::Failed(Error::Usage(format!("thread pool: {e}")))),
    }
}

fn with_pool<T: Send>(
    pool: &Option<rayon::ThreadPool>,
    work: impl FnOnce() -> T + Send,
) -> T {
    match pool {
        Some(p) => p.install(work),
        None => work(),
    }
}

fn cmd_index(args: IndexArgs) -> CliResult<()> {
    let index = match (&args.catalog, &args.contexts) {
        (Some(catalog_path), None) => {
            let catalog = Catalog::load(catalog_path)?;
            InvertedIndex::build(
                catalog
                    .iter()
                    .map(|e| (e.id.clone(), e.opening_text.as_str())),
            )?
        }
        (None, Some(contexts_path)) => {
            let store = ContextStore::load(contexts_path)?;
            InvertedIndex::build(store.iter().map(|c| (c.context_id.clone(), c.text.as_str())))?
        }
        _ => {
            return Err(CliError::Failed(Error::Usage(
                "pass exactly one of --catalog or --contexts".into(),
            )));
        }
    };
    refuse_existing(&args.out, args.force)?;
    index.save(&args.out)?;
    println!(
        "indexed {} docs, avg doc length {:.4} -> {}",
        index.doc_count(),
        index.avg_doc_length(),
        args.out.display()
    );
    Ok(())
}

struct LoadedStores {
    entities: Vec<EntityQuery>,
    catalog: Catalog,
    catalog_index: InvertedIndex,
    contexts: ContextStore,
    paths: BTreeMap<&'static str, PathBuf>,
}

fn load_common(stores: &StoreArgs) -> CliResult<LoadedStores> {
    let entities_path = resolve_path(stores.entities.clone(), "entities.jsonl")?;
    let catalog_path = resolve_path(stores.catalog.clone(), "catalog.jsonl")?;
    let contexts_path = resolve_path(stores.contexts.clone(), "contexts.jsonl")?;

    let entities = load_entities(&entities_path)?;
    let catalog = Catalog::load(&catalog_path)?;
    let contexts = ContextStore::load(&contexts_path)?;
    let catalog_index = InvertedIndex::build(
        catalog
            .iter()
            .map(|e| (e.id.clone(), e.opening_text.as_str())),
    )?;
    let mut paths = BTreeMap::new();
    paths.insert("entities", entities_path);
    paths.insert("catalog", catalog_path);
    paths.insert("contexts", contexts_path);
    Ok(LoadedStores {
        entities,
        catalog,
        catalog_index,
        contexts,
        paths,
    })
}

fn rank_all(
    entities: &[EntityQuery],
    stores: Stores<'_>,
    cfg: &PipelineConfig,
    tag: &str,
) -> Result<Vec<ContextRanking>, Error> {
    let mut rankings = entities
        .par_iter()
        .map(|entity| {
            let mut ranking = rank_entity(entity, stores, cfg)?;
            ranking.tag = tag.to_string();
            Ok::<_, Error>(ranking)
        })
        .collect::<Result<Vec<_>, _>>()?;
    // par_iter preserves order, but make the contract explicit for the
    // run file: entities appear in input order.
    for (ranking, entity) in rankings.iter_mut().zip(entities) {
        debug_assert_eq!(ranking.entity_id, entity.id);
    }
    Ok(rankings)
}

fn report_diagnostics(rankings: &[ContextRanking]) {
    for ranking in rankings {
        if let Some(d) = &ranking.diagnostics {
            if d.empty_support {
                log::warn!(
                    "[{}] {}: no usable support information; all-zero ranking",
                    ranking.tag,
                    ranking.entity_id
                );
            } else if d.lost_mass > 1e-9 {
                log::info!(
                    "[{}] {}: lost probability mass {:.6} ({} skipped entities, {} zero-denominator support contexts)",
                    ranking.tag,
                    ranking.entity_id,
                    d.lost_mass,
                    d.support_entities_skipped,
                    d.zero_denominator_contexts
                );
            }
        }
    }
}

fn cmd_rank(args: RankArgs) -> CliResult<()> {
    let bm25 = Bm25Params { k1: args.k1, b: args.b };
    let configs: Vec<PipelineConfig> = if args.grid {
        PipelineConfig::grid(args.theta, bm25, args.cap)
    } else {
        vec![PipelineConfig {
            ser_variant: args.ser.into(),
            support_entity_cutoff: args.n,
            support_context_cutoff: args.m,
            ccr_variant: args.ccr.into(),
            theta: args.theta,
            bm25,
            candidate_cap: args.cap,
        }]
    };
    for cfg in &configs {
        cfg.validate()?;
    }
    if args.grid && args.tag.is_some() {
        return Err(CliError::Failed(Error::Usage(
            "--tag cannot be combined with --grid".into(),
        )));
    }

    let loaded = load_common(&args.stores)?;
    let annotations_path = resolve_path(args.stores.annotations.clone(), "annotations.jsonl")?;
    let annotations = AnnotationStore::load(&annotations_path, args.theta)?;

    let needs_embeddings = configs
        .iter()
        .any(|c| c.ccr_variant == CcrVariant::Semantic);
    let embeddings_path = if needs_embeddings {
        Some(resolve_path(args.stores.embeddings.clone(), "embeddings.txt")?)
    } else {
        None
    };
    let embeddings = embeddings_path
        .as_ref()
        .map(EmbeddingTable::load)
        .transpose()?;

    let stores = Stores {
        catalog: &loaded.catalog,
        catalog_index: &loaded.catalog_index,
        contexts: &loaded.contexts,
        annotations: &annotations,
        embeddings: embeddings.as_ref(),
    };

    let mut input_paths: Vec<(&str, &Path)> = loaded
        .paths
        .iter()
        .map(|(k, v)| (*k, v.as_path()))
        .collect();
    input_paths.push(("annotations", annotations_path.as_path()));
    if let Some(p) = &embeddings_path {
        input_paths.push(("embeddings", p.as_path()));
    }

    if args.grid {
        fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    }
    let pool = build_thread_pool(args.jobs)?;

    for cfg in &configs {
        let tag = args.tag.clone().unwrap_or_else(|| cfg.tag());
        let run_path = if args.grid {
            args.out.join(format!("{tag}.run"))
        } else {
            args.out.clone()
        };
        refuse_existing(&run_path, args.force)?;

        let rankings = with_pool(&pool, || rank_all(&loaded.entities, stores, cfg, &tag))?;
        report_diagnostics(&rankings);
        write_atomic(&run_path, format_run(&rankings).as_bytes())?;

        let manifest_path = run_path.with_extension("manifest.json");
        write_manifest(
            &run_path,
            &manifest_path,
            &tag,
            ManifestConfig::Pipeline {
                ser: cfg.ser_variant.name().to_string(),
                n: cfg.support_entity_cutoff,
                m: cfg.support_context_cutoff,
                ccr: cfg.ccr_variant.name().to_string(),
                theta: cfg.theta,
                k1: cfg.bm25.k1,
                b: cfg.bm25.b,
                candidate_cap: cfg.candidate_cap,
            },
            digest_inputs(&input_paths)?,
        )?;
        println!(
            "wrote {} ({} entities, tag {})",
            run_path.display(),
            loaded.entities.len(),
            tag
        );
    }
    Ok(())
}

fn cmd_baseline(args: BaselineArgs) -> CliResult<()> {
    let bm25 = Bm25Params { k1: args.k1, b: args.b };
    bm25.validate()?;
    if args.cap == 0 {
        return Err(CliError::Failed(Error::Usage("--cap must be >= 1".into())));
    }
    let loaded = load_common(&args.stores)?;
    refuse_existing(&args.out, args.force)?;
    let pool = build_thread_pool(args.jobs)?;

    // Only the linker method needs annotations; they are loaded
    // unthresholded because the baseline applies theta itself.
    let annotations_path = match args.method {
        BaselineMethod::Linker => Some(resolve_path(
            args.stores.annotations.clone(),
            "annotations.jsonl",
        )?),
        BaselineMethod::Sentence => None,
    };
    let annotations = annotations_path
        .as_ref()
        .map(|p| AnnotationStore::load(p, 0.0))
        .transpose()?;

    let (tag, config) = match args.method {
        BaselineMethod::Sentence => (
            args.tag.clone().unwrap_or_else(|| "sentence-bm25".into()),
            ManifestConfig::Baseline {
                method: "sentence".into(),
                theta: None,
                k1: bm25.k1,
                b: bm25.b,
                candidate_cap: args.cap,
            },
        ),
        BaselineMethod::Linker => (
            args.tag
                .clone()
                .unwrap_or_else(|| format!("linker-t{}", args.theta)),
            ManifestConfig::Baseline {
                method: "linker".into(),
                theta: Some(args.theta),
                k1: bm25.k1,
                b: bm25.b,
                candidate_cap: args.cap,
            },
        ),
    };

    let rankings = with_pool(&pool, || {
        loaded
            .entities
            .par_iter()
            .map(|entity| {
                let candidates = gather_candidate_contexts(entity, &loaded.contexts, args.cap);
                match args.method {
                    BaselineMethod::Sentence => {
                        sentence_retrieval_baseline(entity, &candidates, bm25, &tag)
                    }
                    BaselineMethod::Linker => linker_baseline(
                        entity,
                        &candidates,
                        annotations.as_ref().expect("loaded for linker"),
                        args.theta,
                        &tag,
                    ),
                }
            })
            .collect::<Result<Vec<_>, _>>()
    })?;

    let mut input_paths: Vec<(&str, &Path)> = loaded
        .paths
        .iter()
        .map(|(k, v)| (*k, v.as_path()))
        .collect();
    if let Some(p) = &annotations_path {
        input_paths.push(("annotations", p.as_path()));
    }

    write_atomic(&args.out, format_run(&rankings).as_bytes())?;
    write_manifest(
        &args.out,
        &args.out.with_extension("manifest.json"),
        &tag,
        config,
        digest_inputs(&input_paths)?,
    )?;
    println!(
        "wrote {} ({} entities, tag {})",
        args.out.display(),
        loaded.entities.len(),
        tag
    );
    Ok(())
}

fn cmd_pool(args: PoolArgs) -> CliResult<()> {
    if args.k == 0 {
        return Err(CliError::Failed(Error::Usage("--k must be >= 1".into())));
    }
    refuse_existing(&args.out, args.force)?;
    let runs: Vec<RunData> = args
        .runs
        .iter()
        .map(read_run)
        .collect::<Result<_, _>>()?;
    let contexts = args.contexts.as_ref().map(ContextStore::load).transpose()?;

    let pool = pool_top_k(&runs, args.k);
    let mut body = String::new();
    for (entity, context) in &pool {
        match &contexts {
            Some(store) => {
                let text = store.get(context).map(|c| c.text.as_str()).unwrap_or("");
                body.push_str(&format!("{entity}\t{context}\t{text}\n"));
            }
            None => body.push_str(&format!("{entity}\t{context}\n")),
        }
    }
    write_atomic(&args.out, body.as_bytes())?;
    println!(
        "pooled {} (entity, context) pairs from {} runs at depth {} -> {}",
        pool.len(),
        runs.len(),
        args.k,
        args.out.display()
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> CliResult<()> {
    let qrels = Qrels::load(&args.qrels)?;
    let partition = args.subset.as_ref().map(Partition::load).transpose()?;
    let runs: Vec<RunData> = args
        .runs
        .iter()
        .map(read_run)
        .collect::<Result<_, _>>()?;

    let report = evaluate_runs(&runs, &qrels, partition.as_ref(), args.baseline.as_deref())?;
    let text = render_text(&report);
    print!("{text}");

    if let Some(prefix) = &args.out {
        let txt_path = prefix.with_extension("txt");
        let json_path = prefix.with_extension("json");
        refuse_existing(&txt_path, args.force)?;
        refuse_existing(&json_path, args.force)?;
        write_atomic(&txt_path, text.as_bytes())?;
        let mut body = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Usage(format!("report serialization failed: {e}")))?;
        body.push('\n');
        write_atomic(&json_path, body.as_bytes())?;
        println!("wrote {} and {}", txt_path.display(), json_path.display());
    }
    Ok(())
}
