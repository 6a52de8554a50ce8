//! Iterative retrieval: generate a query from the current context, retrieve,
//! extend the context, repeat for a fixed number of hops.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::{debug, warn};

use crate::error::{Error, Result};
use crate::index::{Document, Index};
use crate::oracle::{candidate_queries, derive_oracle, select_oracle, OracleOptions, OracleQuery};
use crate::ranking::{retrieve_hits, MatchClass, RankingParams, SearchHit};

pub const TITLE_OPEN: &str = "<t>";
pub const TITLE_CLOSE: &str = "</t>";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Number of hops `S`.
    pub hops: usize,
    /// Documents added per hop.
    pub n: usize,
    pub ranking: RankingParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            hops: 2,
            n: 5,
            ranking: RankingParams::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hops == 0 {
            return Err(Error::InvalidParams("hops must be >= 1".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("n must be >= 1".into()));
        }
        self.ranking.validate()?;
        if self.ranking.rerank_pool < self.n {
            return Err(Error::InvalidParams(format!(
                "rerank_pool {} is smaller than n {}",
                self.ranking.rerank_pool, self.n
            )));
        }
        Ok(())
    }

    /// Paragraph budget handed to a reader: `hops * n`.
    pub fn budget(&self) -> usize {
        self.hops * self.n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    /// 1-based.
    pub hop_index: usize,
    pub query: String,
    pub retrieved: Vec<Document>,
    /// Gold document placed into this hop by [`training_context`].
    pub injected_gold: Option<u32>,
    /// The generator produced an empty query; nothing was retrieved.
    pub empty_query: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalContext {
    pub question_id: String,
    pub question: String,
    pub hops: Vec<Hop>,
}

impl RetrievalContext {
    pub fn new(question_id: impl Into<String>, question: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            question: question.into(),
            hops: Vec::new(),
        }
    }

    /// Documents in hop-then-rank order.
    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.hops.iter().flat_map(|h| h.retrieved.iter())
    }

    pub fn titles(&self) -> Vec<&str> {
        self.documents().map(|d| d.title.as_str()).collect()
    }

    pub fn contains_doc(&self, doc_id: u32) -> bool {
        self.documents().any(|d| d.doc_id == doc_id)
    }

    pub fn serialize(&self) -> String {
        serialize_context(self)
    }
}

/// `q <t>title</t> text <t>title</t> text ...` in hop-then-rank order.
pub fn serialize_context(ctx: &RetrievalContext) -> String {
    let mut out = ctx.question.clone();
    for doc in ctx.documents() {
        out.push(' ');
        out.push_str(TITLE_OPEN);
        out.push_str(&doc.title);
        out.push_str(TITLE_CLOSE);
        out.push(' ');
        out.push_str(&doc.text());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedContext {
    pub question: String,
    /// (title, text) pairs.
    pub documents: Vec<(String, String)>,
}

/// Inverse of [`serialize_context`] for contexts whose strings contain no
/// title delimiters.
pub fn parse_context(serialized: &str) -> Result<ParsedContext> {
    let sep = format!(" {TITLE_OPEN}");
    let (question, mut rest) = match serialized.find(&sep) {
        Some(p) => (&serialized[..p], Some(&serialized[p + sep.len()..])),
        None => (serialized, None),
    };
    let mut documents = Vec::new();
    while let Some(r) = rest {
        let close = r
            .find(TITLE_CLOSE)
            .ok_or_else(|| Error::MalformedContext("unterminated title".into()))?;
        let title = &r[..close];
        let after = r[close + TITLE_CLOSE.len()..]
            .strip_prefix(' ')
            .ok_or_else(|| Error::MalformedContext(format!("no space after title {title:?}")))?;
        let (text, next) = match after.find(&sep) {
            Some(p) => (&after[..p], Some(&after[p + sep.len()..])),
            None => (after, None),
        };
        documents.push((title.to_string(), text.to_string()));
        rest = next;
    }
    Ok(ParsedContext {
        question: question.to_string(),
        documents,
    })
}

/// A hop query generator `G_k(q, C_k)`.
pub trait QueryGenerator: Send + Sync {
    /// An empty string means "no query"; the hop is recorded empty.
    fn generate(&self, ctx: &RetrievalContext, serialized: &str, hop: usize) -> Result<String>;
}

/// Uses the question itself as every hop's query.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuestionGenerator;

impl QueryGenerator for QuestionGenerator {
    fn generate(&self, ctx: &RetrievalContext, _serialized: &str, _hop: usize) -> Result<String> {
        Ok(ctx.question.clone())
    }
}

/// Oracle queries toward the gold documents not yet in the context.
///
/// Among the remaining gold documents, the one whose oracle query ranks it
/// best is targeted, which mirrors calling the more retrievable gold `d_1`.
pub struct OracleGenerator<'a> {
    index: &'a Index,
    golds: HashMap<String, Vec<u32>>,
    params: RankingParams,
    opts: OracleOptions,
}

impl<'a> OracleGenerator<'a> {
    pub fn new(
        index: &'a Index,
        golds: HashMap<String, Vec<u32>>,
        params: RankingParams,
        opts: OracleOptions,
    ) -> Self {
        Self {
            index,
            golds,
            params,
            opts,
        }
    }
}

impl QueryGenerator for OracleGenerator<'_> {
    fn generate(&self, ctx: &RetrievalContext, serialized: &str, hop: usize) -> Result<String> {
        let Some(golds) = self.golds.get(&ctx.question_id) else {
            warn!(question_id = %ctx.question_id, "no gold documents registered");
            return Ok(String::new());
        };
        let mut targets: Vec<u32> = golds.iter().copied().filter(|&g| !ctx.contains_doc(g)).collect();
        if targets.is_empty() {
            targets = golds.clone();
        }
        match best_oracle(
            self.index,
            &ctx.question_id,
            hop,
            serialized,
            &targets,
            &self.params,
            &self.opts,
        ) {
            Ok(o) => Ok(o.span.text),
            Err(Error::NoOracle { .. }) => {
                warn!(question_id = %ctx.question_id, hop, "no oracle candidate");
                Ok(String::new())
            }
            Err(e) => Err(e),
        }
    }
}

/// Oracle for whichever of `golds` is easiest to retrieve from `context`:
/// lowest gold rank, then higher gold score, then lower doc_id.
pub fn best_oracle(
    index: &Index,
    question_id: &str,
    hop: usize,
    context: &str,
    golds: &[u32],
    params: &RankingParams,
    opts: &OracleOptions,
) -> Result<OracleQuery> {
    let mut best: Option<OracleQuery> = None;
    for &g in golds {
        let doc = index.document(g).ok_or_else(|| Error::GoldNotFound {
            question_id: question_id.to_string(),
            title: format!("doc_id {g}"),
        })?;
        let cands = candidate_queries(index.analyzer(), context, &doc, opts);
        if cands.is_empty() {
            continue;
        }
        let o = select_oracle(question_id, hop, &cands, g, index, params)?;
        let better = match &best {
            None => true,
            Some(b) => {
                let (r, br) = (o.gold_rank.unwrap_or(usize::MAX), b.gold_rank.unwrap_or(usize::MAX));
                r < br || (r == br && o.gold_score.unwrap_or(f64::NEG_INFINITY) > b.gold_score.unwrap_or(f64::NEG_INFINITY))
            }
        };
        if better {
            best = Some(o);
        }
    }
    best.ok_or_else(|| Error::NoOracle {
        question_id: question_id.to_string(),
        hop,
    })
}

/// Orders gold documents `d_1` first: the one whose question-derived oracle
/// ranks it best. Keeps the given order when no oracle exists.
pub fn order_golds(
    index: &Index,
    question_id: &str,
    question: &str,
    golds: &[u32],
    params: &RankingParams,
    opts: &OracleOptions,
) -> Result<Vec<u32>> {
    match best_oracle(index, question_id, 1, question, golds, params, opts) {
        Ok(o) => {
            let mut out = vec![o.gold_doc_id];
            out.extend(golds.iter().copied().filter(|&g| g != o.gold_doc_id));
            Ok(out)
        }
        Err(Error::NoOracle { .. }) => Ok(golds.to_vec()),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct ExternalLine {
    question_id: String,
    hop: usize,
    query: String,
}

/// Precomputed queries keyed by (question_id, hop), read from JSON lines
/// with `question_id`, `hop` and `query` fields.
#[derive(Debug, Clone, Default)]
pub struct ExternalGenerator {
    queries: HashMap<(String, usize), String>,
}

impl ExternalGenerator {
    pub fn from_jsonl(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut queries = HashMap::new();
        for (i, line) in raw.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: ExternalLine = serde_json::from_str(line).map_err(|e| Error::Config(format!(
                "{}:{}: {e}",
                path.display(),
                i + 1
            )))?;
            queries.insert((rec.question_id, rec.hop), rec.query);
        }
        Ok(Self { queries })
    }

    pub fn insert(&mut self, question_id: impl Into<String>, hop: usize, query: impl Into<String>) {
        self.queries.insert((question_id.into(), hop), query.into());
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

impl QueryGenerator for ExternalGenerator {
    fn generate(&self, ctx: &RetrievalContext, _serialized: &str, hop: usize) -> Result<String> {
        Ok(self
            .queries
            .get(&(ctx.question_id.clone(), hop))
            .cloned()
            .unwrap_or_default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolEntry {
    pub rank: usize,
    pub doc_id: u32,
    pub title: String,
    pub raw_score: f64,
    pub boosted_score: f64,
    pub tier: f64,
    pub match_class: MatchClass,
    pub kept: bool,
    /// Why a pool document was not kept, when it was considered.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropped: Option<DropReason>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    AlreadyInContext,
    DuplicateTitle,
    ReplacedByGold,
}

/// One JSON-lines trace record: everything needed to explain a hop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopTrace {
    pub question_id: String,
    pub hop: usize,
    pub query: String,
    pub empty_query: bool,
    pub pool: Vec<PoolEntry>,
    pub kept: Vec<String>,
    pub injected: Option<String>,
}

fn entry(rank: usize, h: &SearchHit) -> PoolEntry {
    PoolEntry {
        rank,
        doc_id: h.doc_id,
        title: h.title.clone(),
        raw_score: h.raw_score,
        boosted_score: h.boosted_score,
        tier: h.rerank_tier,
        match_class: h.match_class,
        kept: false,
        dropped: None,
    }
}

/// Retrieves for `query` and appends hop `ctx.hops.len() + 1`: the first `n`
/// pool documents whose id and title are new to the context.
pub fn extend_context(
    index: &Index,
    ctx: &mut RetrievalContext,
    query: String,
    config: &PipelineConfig,
) -> HopTrace {
    let hop_index = ctx.hops.len() + 1;
    let empty_query = query.trim().is_empty();
    let mut trace = HopTrace {
        question_id: ctx.question_id.clone(),
        hop: hop_index,
        query: query.clone(),
        empty_query,
        pool: Vec::new(),
        kept: Vec::new(),
        injected: None,
    };
    let mut retrieved = Vec::new();
    if empty_query {
        warn!(question_id = %ctx.question_id, hop = hop_index, "empty query; hop left empty");
    } else {
        let pool_size = config.ranking.rerank_pool.max(config.n);
        let hits = retrieve_hits(index, &query, pool_size, &config.ranking);
        let mut ids: HashSet<u32> = ctx.documents().map(|d| d.doc_id).collect();
        let mut titles: HashSet<String> = ctx.documents().map(|d| d.title.clone()).collect();
        for (i, h) in hits.iter().enumerate() {
            let mut e = entry(i + 1, h);
            if retrieved.len() < config.n {
                if ids.contains(&h.doc_id) {
                    e.dropped = Some(DropReason::AlreadyInContext);
                } else if titles.contains(&h.title) {
                    e.dropped = Some(DropReason::DuplicateTitle);
                } else if let Some(doc) = index.document(h.doc_id) {
                    ids.insert(h.doc_id);
                    titles.insert(h.title.clone());
                    e.kept = true;
                    trace.kept.push(h.title.clone());
                    retrieved.push(doc);
                }
            }
            trace.pool.push(e);
        }
    }
    debug!(question_id = %ctx.question_id, hop = hop_index, kept = retrieved.len(), "hop done");
    ctx.hops.push(Hop {
        hop_index,
        query,
        retrieved,
        injected_gold: None,
        empty_query,
    });
    trace
}

/// One hop: `q_k = G_k(q, C_k)`, then `C_{k+1} = C_k + IR_n(q_k)`.
pub fn run_hop(
    index: &Index,
    ctx: &mut RetrievalContext,
    generator: &dyn QueryGenerator,
    config: &PipelineConfig,
) -> Result<HopTrace> {
    let hop = ctx.hops.len() + 1;
    if hop > config.hops {
        return Err(Error::InvalidParams(format!(
            "hop {hop} exceeds configured hop count {}",
            config.hops
        )));
    }
    let serialized = serialize_context(ctx);
    let query = generator.generate(ctx, &serialized, hop)?;
    Ok(extend_context(index, ctx, query, config))
}

/// Runs all hops for one question.
pub fn run(
    index: &Index,
    question_id: &str,
    question: &str,
    generators: &[&dyn QueryGenerator],
    config: &PipelineConfig,
) -> Result<(RetrievalContext, Vec<HopTrace>)> {
    config.validate()?;
    if generators.len() != config.hops {
        return Err(Error::InvalidParams(format!(
            "{} generators for {} hops",
            generators.len(),
            config.hops
        )));
    }
    let mut ctx = RetrievalContext::new(question_id, question);
    let mut traces = Vec::with_capacity(config.hops);
    for g in generators {
        traces.push(run_hop(index, &mut ctx, *g, config)?);
    }
    Ok((ctx, traces))
}

/// Supervision record for the hop-`k` query generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub question_id: String,
    pub hop: usize,
    /// Serialized `C_k`; the oracle span offsets index this string.
    pub context: String,
    pub oracle: OracleQuery,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutput {
    pub records: Vec<TrainingRecord>,
    pub context: RetrievalContext,
    pub traces: Vec<HopTrace>,
}

/// Builds `C_1..C_S` from oracle queries toward `golds` (in `d_1..d_S`
/// order), injecting each `d_k` into hop `k` when retrieval missed it.
pub fn training_context(
    index: &Index,
    question_id: &str,
    question: &str,
    golds: &[u32],
    config: &PipelineConfig,
    opts: &OracleOptions,
) -> Result<TrainingOutput> {
    config.validate()?;
    if golds.len() != config.hops {
        return Err(Error::InvalidParams(format!(
            "{} gold documents for {} hops",
            golds.len(),
            config.hops
        )));
    }
    let mut ctx = RetrievalContext::new(question_id, question);
    let mut records = Vec::with_capacity(golds.len());
    let mut traces = Vec::with_capacity(golds.len());
    for (k, &gold_id) in golds.iter().enumerate() {
        let hop = k + 1;
        let gold = index.document(gold_id).ok_or_else(|| Error::GoldNotFound {
            question_id: question_id.to_string(),
            title: format!("doc_id {gold_id}"),
        })?;
        let serialized = serialize_context(&ctx);
        let oracle = derive_oracle(index, question_id, hop, &serialized, &gold, &config.ranking, opts)?;
        let mut trace = extend_context(index, &mut ctx, oracle.span.text.clone(), config);
        if !ctx.contains_doc(gold_id) {
            inject_gold(&mut ctx, &mut trace, gold, config.n);
        }
        records.push(TrainingRecord {
            question_id: question_id.to_string(),
            hop,
            context: serialized,
            oracle,
        });
        traces.push(trace);
    }
    Ok(TrainingOutput {
        records,
        context: ctx,
        traces,
    })
}

fn inject_gold(ctx: &mut RetrievalContext, trace: &mut HopTrace, gold: Document, n: usize) {
    let hop = ctx.hops.last_mut().expect("a hop was just added");
    let slot = match hop.retrieved.iter().position(|d| d.title == gold.title) {
        Some(same_title) => Some(same_title),
        None if hop.retrieved.len() >= n => Some(hop.retrieved.len() - 1),
        None => None,
    };
    match slot {
        Some(i) => {
            let out = std::mem::replace(&mut hop.retrieved[i], gold.clone());
            trace.kept.retain(|t| *t != out.title);
            for e in trace.pool.iter_mut().filter(|e| e.doc_id == out.doc_id) {
                e.kept = false;
                e.dropped = Some(DropReason::ReplacedByGold);
            }
            // Keep the gold in the last slot so the order reads "retrieved, then injected".
            let g = hop.retrieved.remove(i);
            hop.retrieved.push(g);
        }
        None => hop.retrieved.push(gold.clone()),
    }
    trace.kept.push(gold.title.clone());
    trace.injected = Some(gold.title.clone());
    hop.injected_gold = Some(gold.doc_id);
}

/// Reader input in the distractor-setting schema: `context` is a list of
/// `[title, sentences]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaRecord {
    #[serde(rename = "_id")]
    pub id: String,
    pub question: String,
    pub context: Vec<(String, Vec<String>)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supporting_facts: Option<Vec<(String, usize)>>,
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub question_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<String>,
}

/// Final context as a reader record, paragraphs in hop-then-rank order.
pub fn export_qa_input(ctx: &RetrievalContext) -> QaRecord {
    let mut seen = HashSet::new();
    let context = ctx
        .documents()
        .filter(|d| seen.insert(d.title.clone()))
        .map(|d| (d.title.clone(), d.sentences.clone()))
        .collect();
    QaRecord {
        id: ctx.question_id.clone(),
        question: ctx.question.clone(),
        context,
        answer: None,
        supporting_facts: None,
        question_type: None,
        level: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::tests::bush_corpus;
    use crate::textproc::Analyzer;
    use proptest::prelude::*;

    fn doc(id: u32, title: &str, text: &str) -> Document {
        Document::new(id, title, vec![text.to_string()])
    }

    fn armada_index() -> Index {
        Index::build(
            vec![
                doc(0, "Armada (novel)", "Armada is a science fiction novel by Ernest Cline."),
                doc(1, "Ernest Cline", "Ernest Cline is an American novelist. He wrote Ready Player One."),
                doc(2, "Spanish Armada", "The Spanish Armada sailed in 1588."),
                doc(3, "Ready Player One (film)", "Ready Player One is a film by Steven Spielberg."),
                doc(4, "Steven Spielberg", "Steven Spielberg is an American film director."),
                doc(5, "Armada (band)", "Armada is a rock band."),
            ],
            Analyzer::default(),
        )
        .unwrap()
    }

    #[test]
    fn serialize_examples() {
        let mut ctx = RetrievalContext::new("q1", "Who wrote Armada?");
        assert_eq!(serialize_context(&ctx), "Who wrote Armada?");
        ctx.hops.push(Hop {
            hop_index: 1,
            query: "Armada".into(),
            retrieved: vec![doc(0, "Armada", "A novel.")],
            injected_gold: None,
            empty_query: false,
        });
        let s = serialize_context(&ctx);
        assert_eq!(s, "Who wrote Armada? <t>Armada</t> A novel.");
        let p = parse_context(&s).unwrap();
        assert_eq!(p.question, "Who wrote Armada?");
        assert_eq!(p.documents, vec![("Armada".to_string(), "A novel.".to_string())]);
        assert!(parse_context("q <t>open").is_err());
    }

    #[test]
    fn hop_dedups_and_backfills() {
        let idx = armada_index();
        let cfg = PipelineConfig {
            hops: 2,
            n: 2,
            ..Default::default()
        };
        let (ctx, traces) = run(
            &idx,
            "q",
            "Armada novel",
            &[&QuestionGenerator, &QuestionGenerator],
            &cfg,
        )
        .unwrap();
        let titles = ctx.titles();
        let unique: HashSet<_> = titles.iter().collect();
        assert_eq!(unique.len(), titles.len());
        assert_eq!(ctx.hops[0].retrieved.len(), 2);
        // The second identical query can only add what the first did not keep.
        let first: HashSet<u32> = ctx.hops[0].retrieved.iter().map(|d| d.doc_id).collect();
        assert!(ctx.hops[1].retrieved.iter().all(|d| !first.contains(&d.doc_id)));
        assert!(traces[1]
            .pool
            .iter()
            .any(|e| e.dropped == Some(DropReason::AlreadyInContext)));
    }

    #[test]
    fn single_doc_corpus() {
        let idx = Index::build(vec![doc(0, "Solo", "solo text")], Analyzer::default()).unwrap();
        let cfg = PipelineConfig {
            hops: 1,
            n: 1,
            ..Default::default()
        };
        let (ctx, _) = run(&idx, "q", "solo", &[&QuestionGenerator], &cfg).unwrap();
        assert_eq!(ctx.titles(), vec!["Solo"]);
    }

    #[test]
    fn empty_query_is_recorded() {
        let idx = armada_index();
        let ext = ExternalGenerator::default();
        let cfg = PipelineConfig {
            hops: 1,
            ..Default::default()
        };
        let (ctx, traces) = run(&idx, "q", "anything", &[&ext], &cfg).unwrap();
        assert!(ctx.hops[0].empty_query && ctx.hops[0].retrieved.is_empty());
        assert!(traces[0].empty_query);
        let rec = export_qa_input(&ctx);
        assert!(rec.context.is_empty());
    }

    #[test]
    fn generator_count_must_match() {
        let idx = armada_index();
        let err = run(&idx, "q", "x", &[&QuestionGenerator], &PipelineConfig::default());
        assert!(matches!(err, Err(Error::InvalidParams(_))));
    }

    #[test]
    fn training_context_injects_missing_gold() {
        let idx = armada_index();
        let cfg = PipelineConfig {
            hops: 2,
            n: 1,
            ..Default::default()
        };
        let q = "Which film director adapted a novel by the author of Armada?";
        let out = training_context(&idx, "q", q, &[0, 1], &cfg, &OracleOptions::default()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert!(out.context.contains_doc(0) && out.context.contains_doc(1));
        assert!(out.records[1].context.contains("<t>Armada (novel)</t>"));
        for r in &out.records {
            let span = &r.oracle.span;
            assert_eq!(crate::textproc::char_slice(&r.context, span.char_start, span.char_end), span.text);
        }
    }

    #[test]
    fn injection_replaces_last_slot() {
        // The hop-1 oracle for the unreachable gold cannot rank it, so it is injected.
        let idx = Index::build(bush_corpus(), Analyzer::default()).unwrap();
        let cfg = PipelineConfig {
            hops: 1,
            n: 2,
            ..Default::default()
        };
        let mut ctx = RetrievalContext::new("q", "George W. Bush");
        let mut trace = extend_context(&idx, &mut ctx, "George W. Bush".into(), &cfg);
        let gold = idx.document(6).unwrap();
        assert!(!ctx.contains_doc(6));
        inject_gold(&mut ctx, &mut trace, gold, cfg.n);
        let hop = &ctx.hops[0];
        assert_eq!(hop.retrieved.len(), 2);
        assert_eq!(hop.retrieved[1].doc_id, 6);
        assert_eq!(hop.injected_gold, Some(6));
        assert_eq!(trace.kept.len(), 2);
        assert!(trace.pool.iter().any(|e| e.dropped == Some(DropReason::ReplacedByGold)));
    }

    #[test]
    fn oracle_generator_targets_remaining_gold() {
        let idx = armada_index();
        let golds = HashMap::from([("q".to_string(), vec![0, 4])]);
        let g = OracleGenerator::new(&idx, golds, RankingParams::default(), OracleOptions::default());
        let cfg = PipelineConfig {
            hops: 2,
            n: 1,
            ..Default::default()
        };
        let q = "Did the author of Armada work with Steven Spielberg?";
        let (ctx, _) = run(&idx, "q", q, &[&g, &g], &cfg).unwrap();
        assert!(ctx.contains_doc(0) && ctx.contains_doc(4));
    }

    #[test]
    fn external_generator_reads_jsonl() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.jsonl");
        fs::write(&p, "{\"question_id\":\"a\",\"hop\":1,\"query\":\"Armada\"}\n\n").unwrap();
        let g = ExternalGenerator::from_jsonl(&p).unwrap();
        assert_eq!(g.len(), 1);
        let ctx = RetrievalContext::new("a", "q");
        assert_eq!(g.generate(&ctx, "q", 1).unwrap(), "Armada");
        assert_eq!(g.generate(&ctx, "q", 2).unwrap(), "");
        fs::write(&p, "not json\n").unwrap();
        assert!(ExternalGenerator::from_jsonl(&p).is_err());
    }

    fn plain() -> impl Strategy<Value = String> {
        "[a-zA-Z0-9 ,.<>/()]{0,30}".prop_filter("no delimiters", |s| {
            !s.contains(TITLE_OPEN) && !s.contains(TITLE_CLOSE)
        })
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(
            q in plain(),
            docs in proptest::collection::vec((plain(), plain()), 0..6),
        ) {
            let retrieved: Vec<Document> = docs
                .iter()
                .enumerate()
                .map(|(i, (t, x))| Document::new(i as u32, t.clone(), vec![x.clone()]))
                .collect();
            let expected: Vec<(String, String)> =
                retrieved.iter().map(|d| (d.title.clone(), d.text())).collect();
            let mut ctx = RetrievalContext::new("id", q.clone());
            ctx.hops.push(Hop { hop_index: 1, query: String::new(), retrieved, injected_gold: None, empty_query: false });
            let p = parse_context(&serialize_context(&ctx)).unwrap();
            prop_assert_eq!(p.question, q);
            prop_assert_eq!(p.documents, expected);
        }
    }
}
