use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use tracing::{error, info};

use super::config::{GeneratorMode, RunConfig};
use super::{fixture_corpus, load_dataset, load_wiki_dump, write_dataset, DatasetQuestion, MALFORMED_FRACTION};
use crate::error::{Error, Result};
use crate::eval::{
    ablation_tsv, both_gold_pct, curves_csv, oracle_outcome, pipeline_outcome, recall_by_type, recall_curves,
    run_ablation, single_hop_outcome, EvalQuestion, GoldPair, QuestionOutcome, DEFAULT_KS,
};
use crate::index::{Index, IndexWriter, WriterOptions};
use crate::oracle::OracleRecord;
use crate::pipeline::{
    export_qa_input, order_golds, run, training_context, ExternalGenerator, OracleGenerator,
    QueryGenerator, QuestionGenerator, TrainingRecord,
};
use crate::ranking::retrieve_hits;
use crate::textproc::{Analyzer, FoldingTable, StopList};

const EXIT_FATAL: i32 = 1;
const EXIT_USAGE: i32 = 2;
const EXIT_PARTIAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "multihop", version, about = "Multi-hop document retrieval and recall evaluation")]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Process only the first N documents or questions.
    #[arg(long, global = true)]
    limit: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build and persist an index from a dump directory or a dataset fixture.
    BuildIndex(BuildIndexArgs),
    /// Query an index and print hits as TSV.
    Search(SearchArgs),
    /// Derive oracle queries for every hop of every question.
    OracleGen(QuestionArgs),
    /// Run the iterative pipeline and write traces and reader records.
    RunPipeline(PipelineArgs),
    /// Recall@k curves and both-gold coverage.
    Eval(EvalArgs),
    /// Recall@k under the four ranking configurations.
    Ablation(AblationArgs),
    /// Write per-hop supervision records (context plus oracle span).
    ExportTrainingData(QuestionArgs),
}

#[derive(Debug, Args, Default)]
struct RankingArgs {
    #[arg(long)]
    k1: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    title_boost: Option<f64>,
    #[arg(long)]
    rerank_pool: Option<usize>,
    /// Set the title field boost to 1.
    #[arg(long)]
    no_title_boost: bool,
    /// Set every rerank multiplier to 1.
    #[arg(long)]
    no_rerank: bool,
}

#[derive(Debug, Args)]
struct BuildIndexArgs {
    /// Directory of dump shards.
    #[arg(long)]
    dump: Option<PathBuf>,
    /// Build a desk-scale fixture from this dataset file instead of a dump.
    #[arg(long, conflicts_with = "dump")]
    fixture_dataset: Option<PathBuf>,
    #[arg(long, default_value_t = 500)]
    fixture_questions: usize,
    #[arg(long, default_value_t = 5000)]
    fixture_distractors: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Index directory to create.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stopwords: Option<PathBuf>,
    #[arg(long)]
    folding: Option<PathBuf>,
    #[arg(long)]
    segment_docs: Option<usize>,
    #[arg(long)]
    batch_docs: Option<usize>,
    #[arg(long)]
    spill_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SearchArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    query: String,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Also write search.tsv and a run manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    ranking: RankingArgs,
}

#[derive(Debug, Args)]
struct QuestionArgs {
    #[arg(long)]
    index: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Documents per hop.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    hops: Option<usize>,
    #[arg(long)]
    min_ratio: Option<f64>,
    #[command(flatten)]
    ranking: RankingArgs,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[command(flatten)]
    common: QuestionArgs,
    /// Comma-separated per-hop generators: oracle, question or external:<path>.
    #[arg(long, value_delimiter = ',')]
    generators: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum EvalMode {
    SingleHop,
    Oracle,
    Pipeline,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: QuestionArgs,
    #[arg(long, value_enum, default_value_t = EvalMode::SingleHop)]
    mode: EvalMode,
    /// Comma-separated cutoffs.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KS.to_vec())]
    k: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    generators: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct AblationArgs {
    #[command(flatten)]
    common: QuestionArgs,
    #[arg(long, default_value_t = 10)]
    k: usize,
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code: 0 success, 1 fatal error, 2 usage or configuration
/// error, 3 some questions failed (see `errors.jsonl`).
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(parsed) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::InvalidParams(_) => EXIT_USAGE,
                _ => EXIT_FATAL,
            }
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if cli.limit.is_some() {
        cfg.limit = cli.limit;
    }
    match cli.command {
        Command::BuildIndex(a) => build_index(cfg, a),
        Command::Search(a) => search(cfg, a),
        Command::OracleGen(a) => oracle_gen(cfg, a, false),
        Command::ExportTrainingData(a) => oracle_gen(cfg, a, true),
        Command::RunPipeline(a) => run_pipeline(cfg, a),
        Command::Eval(a) => eval(cfg, a),
        Command::Ablation(a) => ablation(cfg, a),
    }
}

fn apply_ranking(cfg: &mut RunConfig, r: &RankingArgs) {
    if let Some(v) = r.k1 {
        cfg.ranking.k1 = v;
    }
    if let Some(v) = r.b {
        cfg.ranking.b = v;
    }
    if let Some(v) = r.title_boost {
        cfg.ranking.title_field_boost = v;
    }
    if let Some(v) = r.rerank_pool {
        cfg.ranking.rerank_pool = v;
    }
    if r.no_title_boost {
        cfg.ranking = cfg.ranking.without_title_boost();
    }
    if r.no_rerank {
        cfg.ranking = cfg.ranking.without_rerank();
    }
}

fn apply_common(cfg: &mut RunConfig, a: &QuestionArgs) {
    if let Some(p) = &a.index {
        cfg.paths.index = Some(p.clone());
    }
    if let Some(p) = &a.dataset {
        cfg.paths.dataset = Some(p.clone());
    }
    if let Some(p) = &a.out {
        cfg.paths.output = Some(p.clone());
    }
    if let Some(n) = a.n {
        cfg.pipeline.n = n;
    }
    if let Some(h) = a.hops {
        cfg.pipeline.hops = h;
        if cfg.generators.len() != h {
            let fill = cfg.generators.first().cloned().unwrap_or(GeneratorMode::Oracle);
            cfg.generators.resize(h, fill);
        }
    }
    if let Some(r) = a.min_ratio {
        cfg.oracle.min_ratio = r;
    }
    apply_ranking(cfg, &a.ranking);
}

fn apply_generators(cfg: &mut RunConfig, gens: &Option<Vec<String>>) -> Result<()> {
    if let Some(g) = gens {
        cfg.generators = g.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        if cfg.generators.len() != cfg.pipeline.hops {
            cfg.pipeline.hops = cfg.generators.len();
        }
    }
    Ok(())
}

fn require(p: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    p.clone().ok_or_else(|| Error::Config(format!("--{flag} is required (flag or config file)")))
}

fn require_existing(p: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    let p = require(p, flag)?;
    if !p.exists() {
        return Err(Error::Config(format!("--{flag} {} does not exist", p.display())));
    }
    Ok(p)
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn sha256_file(p: &Path) -> Result<String> {
    let mut f = File::open(p).map_err(|e| Error::io(p, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(p, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Files hash by content. An index directory hashes by its manifest, which
/// already checksums every data file; other directories hash their listing
/// (relative path and size) so multi-gigabyte dumps are not reread.
fn input_hash(p: &Path) -> Result<String> {
    if p.is_file() {
        return sha256_file(p);
    }
    let manifest = p.join("manifest.json");
    if manifest.is_file() {
        return sha256_file(&manifest);
    }
    let mut h = Sha256::new();
    let mut entries: Vec<(String, u64)> = walkdir::WalkDir::new(p)
        .into_iter()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| {
            let rel = e.path().strip_prefix(p).unwrap_or(e.path()).to_string_lossy().into_owned();
            (rel, e.metadata().map(|m| m.len()).unwrap_or(0))
        })
        .collect();
    entries.sort();
    for (rel, size) in entries {
        h.update(rel.as_bytes());
        h.update(size.to_le_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    subcommand: &'a str,
    config_hash: String,
    config: &'a RunConfig,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    summary: serde_json::Value,
}

fn write_manifest(
    dir: &Path,
    subcommand: &str,
    cfg: &RunConfig,
    inputs: &[(&str, &Path)],
    outputs: &[&str],
    summary: serde_json::Value,
) -> Result<()> {
    let mut hashes = BTreeMap::new();
    for (name, p) in inputs {
        hashes.insert(name.to_string(), input_hash(p)?);
    }
    let m = RunManifest {
        tool: "multihop",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        config_hash: cfg.hash(),
        config: cfg,
        inputs: hashes,
        outputs: outputs.iter().map(|s| s.to_string()).collect(),
        summary,
    };
    write_json(&dir.join("run_manifest.json"), &m)
}

fn write_json<T: Serialize>(p: &Path, v: &T) -> Result<()> {
    let body = serde_json::to_vec_pretty(v)?;
    fs::write(p, body).map_err(|e| Error::io(p, e))
}

fn write_text(p: &Path, s: &str) -> Result<()> {
    fs::write(p, s).map_err(|e| Error::io(p, e))
}

fn write_jsonl<T: Serialize>(p: &Path, items: impl IntoIterator<Item = T>) -> Result<usize> {
    let f = File::create(p).map_err(|e| Error::io(p, e))?;
    let mut w = BufWriter::new(f);
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut w, &item)?;
        w.write_all(b"\n").map_err(|e| Error::io(p, e))?;
        n += 1;
    }
    w.flush().map_err(|e| Error::io(p, e))?;
    Ok(n)
}

fn analyzer_from(cfg: &RunConfig) -> Result<Analyzer> {
    let stops = match &cfg.paths.stopwords {
        Some(p) => StopList::load(p)?,
        None => StopList::default(),
    };
    let folding = match &cfg.paths.folding {
        Some(p) => FoldingTable::load(p)?,
        None => FoldingTable::default(),
    };
    Ok(Analyzer::new(stops, folding))
}

fn build_index(mut cfg: RunConfig, a: BuildIndexArgs) -> Result<i32> {
    if let Some(p) = a.dump {
        cfg.paths.dump = Some(p);
    }
    if let Some(p) = a.fixture_dataset.clone() {
        cfg.paths.dataset = Some(p);
    }
    if let Some(p) = a.out {
        cfg.paths.index = Some(p);
    }
    if let Some(p) = a.stopwords {
        cfg.paths.stopwords = Some(p);
    }
    if let Some(p) = a.folding {
        cfg.paths.folding = Some(p);
    }
    if let Some(v) = a.segment_docs {
        cfg.writer.segment_docs = v;
    }
    if let Some(v) = a.batch_docs {
        cfg.writer.batch_docs = v;
    }
    if let Some(p) = a.spill_dir {
        cfg.writer.spill_dir = Some(p);
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let out = require(&cfg.paths.index, "out")?;
    let analyzer = analyzer_from(&cfg)?;
    let opts = WriterOptions {
        segment_docs: cfg.writer.segment_docs,
        batch_docs: cfg.writer.batch_docs,
        spill_dir: cfg.writer.spill_dir.clone(),
    };
    let mut writer = IndexWriter::new(analyzer, opts)?;
    let mut inputs: Vec<(&str, PathBuf)> = Vec::new();
    let mut summary = serde_json::Map::new();
    if a.fixture_dataset.is_some() {
        let ds = require_existing(&cfg.paths.dataset, "fixture-dataset")?;
        let load = load_dataset(&ds, None)?;
        let fixture = fixture_corpus(&load.questions, a.fixture_questions, a.fixture_distractors, cfg.seed);
        info!(docs = fixture.documents.len(), questions = fixture.questions.len(), "fixture corpus");
        summary.insert("fixture_questions".into(), fixture.questions.len().into());
        writer.add_all(fixture.documents)?;
        let index = writer.finish()?;
        index.persist(&out)?;
        write_dataset(&out.join("fixture_questions.json"), &fixture.questions)?;
        summary.insert("documents".into(), index.doc_count().into());
        summary.insert("duplicate_titles".into(), index.duplicate_titles().into());
        inputs.push(("dataset", ds));
    } else {
        let dump = require_existing(&cfg.paths.dump, "dump")?;
        let mut stream = load_wiki_dump(&dump, cfg.limit)?;
        writer.add_stream(stream.by_ref())?;
        let stats = stream.stats();
        let index = writer.finish()?;
        index.persist(&out)?;
        info!(?stats, "dump indexed");
        summary.insert("dump".into(), serde_json::to_value(stats)?);
        summary.insert("malformed_cap_fraction".into(), MALFORMED_FRACTION.into());
        summary.insert("documents".into(), index.doc_count().into());
        summary.insert("duplicate_titles".into(), index.duplicate_titles().into());
        inputs.push(("dump", dump));
    }
    let input_refs: Vec<(&str, &Path)> = inputs.iter().map(|(n, p)| (*n, p.as_path())).collect();
    write_manifest(&out, "build-index", &cfg, &input_refs, &["index"], summary.into())?;
    Ok(0)
}

fn search(mut cfg: RunConfig, a: SearchArgs) -> Result<i32> {
    if let Some(p) = a.index {
        cfg.paths.index = Some(p);
    }
    apply_ranking(&mut cfg, &a.ranking);
    cfg.ranking.validate()?;
    let index_dir = require_existing(&cfg.paths.index, "index")?;
    let index = Index::open(&index_dir)?;
    let hits = retrieve_hits(&index, &a.query, a.k, &cfg.ranking);
    let mut tsv = String::from("rank\ttitle\traw_score\tboosted_score\n");
    for (i, h) in hits.iter().enumerate() {
        tsv.push_str(&format!("{}\t{}\t{:.6}\t{:.6}\n", i + 1, h.title, h.raw_score, h.boosted_score));
    }
    print!("{tsv}");
    if let Some(out) = a.out {
        create_dir(&out)?;
        write_text(&out.join("search.tsv"), &tsv)?;
        write_manifest(
            &out,
            "search",
            &cfg,
            &[("index", &index_dir)],
            &["search.tsv"],
            serde_json::json!({ "query": a.query, "hits": hits.len() }),
        )?;
    }
    Ok(0)
}

/// Loaded index, questions and resolved gold doc ids.
struct Batch {
    index: Index,
    questions: Vec<DatasetQuestion>,
    /// Gold doc ids per question, or the first title missing from the index.
    golds: Vec<std::result::Result<Vec<u32>, String>>,
    index_dir: PathBuf,
    dataset: PathBuf,
    out: PathBuf,
}

fn load_batch(cfg: &RunConfig) -> Result<Batch> {
    cfg.validate()?;
    let index_dir = require_existing(&cfg.paths.index, "index")?;
    let dataset = require_existing(&cfg.paths.dataset, "dataset")?;
    let out = require(&cfg.paths.output, "out")?;
    let index = Index::open(&index_dir)?;
    let questions = load_dataset(&dataset, cfg.limit)?.questions;
    let golds = questions
        .iter()
        .map(|q| {
            q.gold_titles
                .iter()
                .map(|t| index.find_by_title(t).ok_or_else(|| t.clone()))
                .collect()
        })
        .collect();
    create_dir(&out)?;
    Ok(Batch {
        index,
        questions,
        golds,
        index_dir,
        dataset,
        out,
    })
}

#[derive(Serialize)]
struct QuestionError {
    question_id: String,
    error: String,
}

/// Writes `errors.jsonl` and returns the exit code for `failures`.
fn finish_errors(out: &Path, failures: Vec<QuestionError>) -> Result<i32> {
    let n = write_jsonl(&out.join("errors.jsonl"), &failures)?;
    if n > 0 {
        error!(failed = n, "some questions failed; see errors.jsonl");
        Ok(EXIT_PARTIAL)
    } else {
        Ok(0)
    }
}

fn eval_question(q: &DatasetQuestion) -> EvalQuestion {
    EvalQuestion {
        question: q.question.clone(),
        gold: q.gold_pair(),
    }
}

#[derive(Serialize)]
struct TrainingLine<'a> {
    question_id: &'a str,
    hop: usize,
    question: &'a str,
    context: &'a str,
    query: &'a str,
    char_start: usize,
    char_end: usize,
    heuristic: crate::oracle::Heuristic,
    gold_title: &'a str,
    gold_rank: Option<usize>,
    flagged: bool,
    injected: bool,
}

fn oracle_gen(mut cfg: RunConfig, a: QuestionArgs, training: bool) -> Result<i32> {
    apply_common(&mut cfg, &a);
    let batch = load_batch(&cfg)?;
    let pc = cfg.pipeline_config();
    let results: Vec<Result<(Vec<TrainingRecord>, Vec<bool>)>> = batch
        .questions
        .par_iter()
        .zip(batch.golds.par_iter())
        .map(|(q, golds)| {
            let golds = gold_ids(q, golds)?;
            let ordered = order_golds(&batch.index, &q.question_id, &q.question, golds, &pc.ranking, &cfg.oracle)?;
            let out = training_context(&batch.index, &q.question_id, &q.question, &ordered, &pc, &cfg.oracle)?;
            let injected = out.context.hops.iter().map(|h| h.injected_gold.is_some()).collect();
            Ok((out.records, injected))
        })
        .collect();
    let mut failures = Vec::new();
    let mut oracle_lines = Vec::new();
    let mut training_lines = Vec::new();
    let (mut hops, mut top5) = (0usize, 0usize);
    for (q, r) in batch.questions.iter().zip(results) {
        match r {
            Ok((records, injected)) => {
                for (rec, inj) in records.iter().zip(injected) {
                    hops += 1;
                    top5 += usize::from(rec.oracle.gold_rank.is_some_and(|r| r <= 5));
                    oracle_lines.push(OracleRecord::from(&rec.oracle));
                    if training {
                        let s = &rec.oracle.span;
                        training_lines.push(serde_json::to_value(TrainingLine {
                            question_id: &rec.question_id,
                            hop: rec.hop,
                            question: &q.question,
                            context: &rec.context,
                            query: &s.text,
                            char_start: s.char_start,
                            char_end: s.char_end,
                            heuristic: s.heuristic,
                            gold_title: &rec.oracle.gold_title,
                            gold_rank: rec.oracle.gold_rank,
                            flagged: rec.oracle.flagged,
                            injected: inj,
                        })?);
                    }
                }
            }
            Err(e) => failures.push(QuestionError {
                question_id: q.question_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    let (name, file) = if training {
        write_jsonl(&batch.out.join("training.jsonl"), &training_lines)?;
        ("export-training-data", "training.jsonl")
    } else {
        write_jsonl(&batch.out.join("oracle.jsonl"), &oracle_lines)?;
        ("oracle-gen", "oracle.jsonl")
    };
    let summary = serde_json::json!({
        "questions": batch.questions.len(),
        "failed": failures.len(),
        "hops": hops,
        "gold_in_top5_pct": if hops == 0 { 0.0 } else { 100.0 * top5 as f64 / hops as f64 },
    });
    info!(%summary, "oracle generation done");
    write_manifest(
        &batch.out,
        name,
        &cfg,
        &[("index", &batch.index_dir), ("dataset", &batch.dataset)],
        &[file, "errors.jsonl"],
        summary,
    )?;
    finish_errors(&batch.out, failures)
}

fn gold_ids<'a>(q: &DatasetQuestion, golds: &'a std::result::Result<Vec<u32>, String>) -> Result<&'a [u32]> {
    golds.as_deref().map_err(|title| Error::GoldNotFound {
        question_id: q.question_id.clone(),
        title: title.clone(),
    })
}

/// Generator objects for `cfg.generators`.
struct Generators<'a> {
    oracle: Option<OracleGenerator<'a>>,
    external: Vec<ExternalGenerator>,
}

impl<'a> Generators<'a> {
    fn new(cfg: &RunConfig, batch: &'a Batch) -> Result<Self> {
        let oracle = cfg.generators.contains(&GeneratorMode::Oracle).then(|| {
            let golds: HashMap<String, Vec<u32>> = batch
                .questions
                .iter()
                .zip(&batch.golds)
                .filter_map(|(q, g)| g.as_ref().ok().map(|g| (q.question_id.clone(), g.clone())))
                .collect();
            OracleGenerator::new(&batch.index, golds, cfg.ranking, cfg.oracle)
        });
        let mut external = Vec::new();
        for g in &cfg.generators {
            if let GeneratorMode::External(p) = g {
                external.push(ExternalGenerator::from_jsonl(p)?);
            }
        }
        Ok(Self { oracle, external })
    }

    fn per_hop<'s>(&'s self, modes: &[GeneratorMode]) -> Vec<&'s dyn QueryGenerator> {
        let mut ext = self.external.iter();
        modes
            .iter()
            .map(|m| -> &dyn QueryGenerator {
                match m {
                    GeneratorMode::Oracle => self.oracle.as_ref().expect("built when configured"),
                    GeneratorMode::Question => &QuestionGenerator,
                    GeneratorMode::External(_) => ext.next().expect("one per external mode"),
                }
            })
            .collect()
    }
}

fn run_pipeline(mut cfg: RunConfig, a: PipelineArgs) -> Result<i32> {
    apply_common(&mut cfg, &a.common);
    apply_generators(&mut cfg, &a.generators)?;
    let batch = load_batch(&cfg)?;
    let pc = cfg.pipeline_config();
    let gens = Generators::new(&cfg, &batch)?;
    let per_hop = gens.per_hop(&cfg.generators);
    let needs_golds = cfg.generators.contains(&GeneratorMode::Oracle);
    let results: Vec<Result<_>> = batch
        .questions
        .par_iter()
        .zip(batch.golds.par_iter())
        .map(|(q, golds)| {
            if needs_golds {
                gold_ids(q, golds)?;
            }
            run(&batch.index, &q.question_id, &q.question, &per_hop, &pc)
        })
        .collect();
    let mut failures = Vec::new();
    let mut traces = Vec::new();
    let mut records = Vec::new();
    let mut contexts = HashMap::new();
    let mut pairs = Vec::new();
    for (q, r) in batch.questions.iter().zip(results) {
        match r {
            Ok((ctx, t)) => {
                let mut rec = export_qa_input(&ctx);
                rec.answer = q.answer.clone();
                rec.supporting_facts = Some(q.supporting_facts.clone());
                rec.question_type = Some(q.question_type.as_str().to_string());
                rec.level = Some(q.level.clone());
                contexts.insert(q.question_id.clone(), rec.context.iter().map(|(t, _)| t.clone()).collect());
                pairs.push(q.gold_pair());
                records.push(rec);
                traces.extend(t);
            }
            Err(e) => failures.push(QuestionError {
                question_id: q.question_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    write_jsonl(&batch.out.join("trace.jsonl"), &traces)?;
    write_jsonl(&batch.out.join("qa_records.jsonl"), &records)?;
    let summary = serde_json::json!({
        "questions": batch.questions.len(),
        "failed": failures.len(),
        "generators": cfg.generators.iter().map(|g| g.to_string()).collect::<Vec<_>>(),
        "both_gold_pct": both_gold_pct(&contexts, &pairs),
    });
    info!(%summary, "pipeline done");
    write_manifest(
        &batch.out,
        "run-pipeline",
        &cfg,
        &[("index", &batch.index_dir), ("dataset", &batch.dataset)],
        &["trace.jsonl", "qa_records.jsonl", "errors.jsonl"],
        summary,
    )?;
    finish_errors(&batch.out, failures)
}

fn eval(mut cfg: RunConfig, a: EvalArgs) -> Result<i32> {
    apply_common(&mut cfg, &a.common);
    if a.mode == EvalMode::Oracle {
        cfg.generators = vec![GeneratorMode::Oracle; cfg.pipeline.hops];
    }
    apply_generators(&mut cfg, &a.generators)?;
    let batch = load_batch(&cfg)?;
    let pc = cfg.pipeline_config();
    let mut ks = a.k.clone();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::Config("--k needs positive cutoffs".into()));
    }
    let depth = *ks.last().expect("non-empty");
    let gens = Generators::new(&cfg, &batch)?;
    let per_hop = gens.per_hop(&cfg.generators);
    let outcomes: Vec<Result<QuestionOutcome>> = batch
        .questions
        .par_iter()
        .zip(batch.golds.par_iter())
        .map(|(q, golds)| {
            let eq = eval_question(q);
            match a.mode {
                EvalMode::SingleHop => Ok(single_hop_outcome(&batch.index, &eq, depth, pc.budget(), &pc.ranking)),
                EvalMode::Pipeline => pipeline_outcome(&batch.index, &eq, &per_hop, &pc, depth).map(|(o, _)| o),
                EvalMode::Oracle => {
                    let golds = gold_ids(q, golds)?;
                    let ordered =
                        order_golds(&batch.index, &q.question_id, &q.question, golds, &pc.ranking, &cfg.oracle)?;
                    let (mut o, _) = oracle_outcome(&batch.index, &eq, &ordered, &pc, &cfg.oracle, depth)?;
                    // Coverage comes from the oracle pipeline, which does not inject golds.
                    let (p, _) = pipeline_outcome(&batch.index, &eq, &per_hop, &pc, depth)?;
                    o.final_titles = p.final_titles;
                    Ok(o)
                }
            }
        })
        .collect();
    let pairs: Vec<GoldPair> = batch.questions.iter().map(DatasetQuestion::gold_pair).collect();
    let mut failures = Vec::new();
    let mut results = Vec::new();
    let mut contexts = HashMap::new();
    for (q, o) in batch.questions.iter().zip(outcomes) {
        match o {
            Ok(o) => {
                contexts.insert(q.question_id.clone(), o.final_titles);
                results.push(o.results);
            }
            // Failed questions stay in the denominator as misses.
            Err(e) => failures.push(QuestionError {
                question_id: q.question_id.clone(),
                error: e.to_string(),
            }),
        }
    }
    let report = recall_curves(&results, &pairs, &ks);
    let by_type = recall_by_type(&results, &pairs, &ks);
    let series = match a.mode {
        EvalMode::SingleHop => "single_hop",
        EvalMode::Oracle => "oracle",
        EvalMode::Pipeline => "pipeline",
    };
    write_text(&batch.out.join("recall.tsv"), &report.to_tsv())?;
    write_text(&batch.out.join("recall.csv"), &curves_csv(&[(series, &report)]))?;
    let mut facet = String::from("type\tk\td1\td2\n");
    for (t, r) in &by_type {
        let name = t.as_str();
        for (i, k) in r.ks.iter().enumerate() {
            facet.push_str(&format!("{name}\t{k}\t{:.2}\t{:.2}\n", r.d1[i], r.d2[i]));
        }
    }
    write_text(&batch.out.join("recall_by_type.tsv"), &facet)?;
    let both = both_gold_pct(&contexts, &pairs);
    write_json(&batch.out.join("report.json"), &report)?;
    let summary = serde_json::json!({
        "mode": a.mode,
        "questions": pairs.len(),
        "failed": failures.len(),
        "both_gold_pct": both,
        "budget": pc.budget(),
    });
    info!(%summary, "evaluation done");
    print!("{}", report.to_tsv());
    println!("both_gold_pct\t{both:.2}");
    write_manifest(
        &batch.out,
        "eval",
        &cfg,
        &[("index", &batch.index_dir), ("dataset", &batch.dataset)],
        &["recall.tsv", "recall.csv", "recall_by_type.tsv", "report.json", "errors.jsonl"],
        summary,
    )?;
    finish_errors(&batch.out, failures)
}

fn ablation(mut cfg: RunConfig, a: AblationArgs) -> Result<i32> {
    apply_common(&mut cfg, &a.common);
    let batch = load_batch(&cfg)?;
    if a.k == 0 {
        return Err(Error::Config("--k must be positive".into()));
    }
    let questions: Vec<EvalQuestion> = batch.questions.iter().map(eval_question).collect();
    let rows = run_ablation(&batch.index, &questions, &cfg.ranking, a.k);
    let tsv = ablation_tsv(&rows, a.k);
    print!("{tsv}");
    write_text(&batch.out.join("ablation.tsv"), &tsv)?;
    write_manifest(
        &batch.out,
        "ablation",
        &cfg,
        &[("index", &batch.index_dir), ("dataset", &batch.dataset)],
        &["ablation.tsv"],
        serde_json::to_value(&rows)?,
    )?;
    Ok(0)
}
