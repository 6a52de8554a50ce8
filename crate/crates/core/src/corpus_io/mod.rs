//! Wikipedia dump and question-set ingestion, run configuration and the CLI.

mod cli;
mod config;

pub use cli::cli;
pub use config::{GeneratorMode, PathsConfig, RunConfig, WriterConfig};

use std::collections::{HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tracing::{info, warn};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::eval::{GoldPair, QuestionType};
use crate::index::Document;

/// Malformed lines tolerated before ingestion aborts, as a fraction of lines read.
pub const MALFORMED_FRACTION: f64 = 0.001;

/// Shard files under `dir` in lexicographic relative-path order.
///
/// `.bz2` shards are decompressed; `.jsonl`, `.json` and extensionless files
/// are read as plain JSON lines. Anything else is ignored.
pub fn dump_shards(dir: &Path) -> Result<Vec<PathBuf>> {
    let meta = fs::metadata(dir).map_err(|e| Error::io(dir, e))?;
    if !meta.is_dir() {
        return Err(Error::Dump {
            path: dir.to_path_buf(),
            reason: "not a directory".into(),
        });
    }
    let mut shards = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Dump {
            path: dir.to_path_buf(),
            reason: e.to_string(),
        })?;
        if !entry.file_type().is_file() || entry.file_name().to_string_lossy().starts_with('.') {
            continue;
        }
        let ext = entry.path().extension().and_then(|e| e.to_str()).unwrap_or("");
        if matches!(ext, "bz2" | "jsonl" | "json" | "") {
            shards.push(entry.into_path());
        }
    }
    // WalkDir sorts per directory; a global sort makes the order independent of nesting.
    shards.sort_by(|a, b| a.strip_prefix(dir).unwrap_or(a).cmp(b.strip_prefix(dir).unwrap_or(b)));
    if shards.is_empty() {
        return Err(Error::Dump {
            path: dir.to_path_buf(),
            reason: "no shard files found".into(),
        });
    }
    Ok(shards)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DumpStats {
    pub shards: usize,
    pub lines: u64,
    pub documents: u64,
    pub malformed: u64,
}

impl DumpStats {
    fn over_cap(&self) -> bool {
        let cap = ((self.lines as f64) * MALFORMED_FRACTION).floor().max(1.0) as u64;
        self.malformed > cap
    }
}

/// Streaming reader over a processed Wikipedia dump directory.
///
/// Documents get dense doc_ids in shard-then-line order. Malformed lines are
/// skipped and counted; once more than `max(1, 0.1%)` of lines read so far
/// are malformed at a shard boundary, the stream ends with an error.
pub struct WikiDump {
    shards: Vec<PathBuf>,
    next_shard: usize,
    current: Option<(PathBuf, Box<dyn BufRead + Send>, u64)>,
    limit: Option<usize>,
    next_id: u32,
    stats: DumpStats,
    done: bool,
}

pub fn load_wiki_dump(dir: &Path, limit: Option<usize>) -> Result<WikiDump> {
    let shards = dump_shards(dir)?;
    info!(shards = shards.len(), dir = %dir.display(), "opening dump");
    Ok(WikiDump {
        shards,
        next_shard: 0,
        current: None,
        limit,
        next_id: 0,
        stats: DumpStats::default(),
        done: false,
    })
}

fn open_shard(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader: Box<dyn Read + Send> = if path.extension().is_some_and(|e| e == "bz2") {
        Box::new(bzip2::read::MultiBzDecoder::new(f))
    } else {
        Box::new(f)
    };
    Ok(Box::new(BufReader::with_capacity(1 << 16, reader)))
}

/// Strips `<a href="...">` / `</a>` anchors some dump variants keep in text.
fn strip_anchors(s: &str) -> String {
    if !s.contains("<a ") && !s.contains("</a>") {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(p) = rest.find('<') {
        out.push_str(&rest[..p]);
        let tail = &rest[p..];
        let is_anchor = tail.starts_with("<a ") || tail.starts_with("</a>");
        match (is_anchor, tail.find('>')) {
            (true, Some(end)) => rest = &tail[end + 1..],
            _ => {
                out.push('<');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

fn sentences_of(v: &Value) -> Option<Vec<String>> {
    let items = v.as_array()?;
    let mut out = Vec::new();
    for item in items {
        match item {
            Value::String(s) => out.push(strip_anchors(s)),
            // Paragraph-grouped variant: a list of sentence lists.
            Value::Array(inner) => {
                for s in inner {
                    out.push(strip_anchors(s.as_str()?));
                }
            }
            _ => return None,
        }
    }
    Some(out)
}

/// Parses one dump line; `None` for malformed lines.
pub fn parse_dump_line(line: &str, doc_id: u32) -> Option<Document> {
    let v: Value = serde_json::from_str(line).ok()?;
    let title = v.get("title")?.as_str()?.trim();
    if title.is_empty() {
        return None;
    }
    let sentences = match v.get("text")? {
        Value::String(s) => vec![strip_anchors(s)],
        other => sentences_of(other)?,
    };
    Some(Document {
        doc_id,
        title: title.to_string(),
        sentences,
        source_url: v.get("url").and_then(Value::as_str).map(str::to_string),
    })
}

impl WikiDump {
    pub fn stats(&self) -> DumpStats {
        self.stats
    }

    pub fn shards(&self) -> &[PathBuf] {
        &self.shards
    }

    fn check_cap(&mut self, shard: &Path) -> Result<()> {
        if self.stats.over_cap() {
            self.done = true;
            return Err(Error::Dump {
                path: shard.to_path_buf(),
                reason: format!(
                    "{} of {} lines malformed, above the {:.1}% cap",
                    self.stats.malformed,
                    self.stats.lines,
                    MALFORMED_FRACTION * 100.0
                ),
            });
        }
        Ok(())
    }

    fn step(&mut self) -> Result<Option<Document>> {
        loop {
            if self.limit.is_some_and(|l| self.stats.documents as usize >= l) {
                return Ok(None);
            }
            if self.current.is_none() {
                let Some(path) = self.shards.get(self.next_shard).cloned() else {
                    return Ok(None);
                };
                self.next_shard += 1;
                self.stats.shards += 1;
                let reader = open_shard(&path)?;
                self.current = Some((path, reader, 0));
            }
            let (path, reader, line_no) = self.current.as_mut().expect("set above");
            let mut line = String::new();
            let read = reader.read_line(&mut line).map_err(|e| Error::Dump {
                path: path.clone(),
                reason: format!("read failed after line {line_no}: {e}"),
            })?;
            if read == 0 {
                let (path, _, _) = self.current.take().expect("set above");
                self.check_cap(&path)?;
                continue;
            }
            *line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            self.stats.lines += 1;
            match parse_dump_line(&line, self.next_id) {
                Some(doc) => {
                    self.next_id += 1;
                    self.stats.documents += 1;
                    return Ok(Some(doc));
                }
                None => {
                    self.stats.malformed += 1;
                    warn!(shard = %path.display(), line = *line_no, "skipping malformed line");
                }
            }
        }
    }
}

impl Iterator for WikiDump {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.step() {
            Ok(Some(d)) => Some(Ok(d)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetQuestion {
    pub question_id: String,
    pub question: String,
    pub answer: Option<String>,
    /// Distinct supporting titles in first-mention order; always two.
    pub gold_titles: Vec<String>,
    pub supporting_facts: Vec<(String, usize)>,
    pub question_type: QuestionType,
    pub level: String,
    /// The record's own paragraphs as `(title, sentences)`.
    pub context: Vec<(String, Vec<String>)>,
}

impl DatasetQuestion {
    pub fn gold_pair(&self) -> GoldPair {
        GoldPair {
            question_id: self.question_id.clone(),
            titles: [self.gold_titles[0].clone(), self.gold_titles[1].clone()],
            question_type: self.question_type,
            level: self.level.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRecord {
    pub position: usize,
    pub question_id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct DatasetLoad {
    pub questions: Vec<DatasetQuestion>,
    pub skipped: Vec<SkippedRecord>,
}

fn parse_question(v: &Value) -> std::result::Result<DatasetQuestion, String> {
    let s = |key: &str| -> std::result::Result<String, String> {
        v.get(key)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| format!("missing string field {key:?}"))
    };
    let question_id = s("_id")?;
    let question = s("question")?;
    let question_type = QuestionType::parse(&s("type")?).ok_or("unknown question type")?;
    let level = s("level")?;
    let answer = v.get("answer").and_then(Value::as_str).map(str::to_string);
    let facts = v
        .get("supporting_facts")
        .and_then(Value::as_array)
        .ok_or("missing supporting_facts")?;
    let mut supporting_facts = Vec::with_capacity(facts.len());
    for f in facts {
        let title = f.get(0).and_then(Value::as_str).ok_or("malformed supporting fact")?;
        let idx = f.get(1).and_then(Value::as_u64).ok_or("malformed supporting fact")?;
        supporting_facts.push((title.to_string(), idx as usize));
    }
    let mut seen = HashSet::new();
    let gold_titles: Vec<String> = supporting_facts
        .iter()
        .filter(|(t, _)| seen.insert(t.clone()))
        .map(|(t, _)| t.clone())
        .collect();
    if gold_titles.len() != 2 {
        return Err(format!("{} distinct gold titles, expected 2", gold_titles.len()));
    }
    let mut context = Vec::new();
    if let Some(paras) = v.get("context").and_then(Value::as_array) {
        for p in paras {
            let title = p.get(0).and_then(Value::as_str).ok_or("malformed context paragraph")?;
            let sents = p
                .get(1)
                .and_then(Value::as_array)
                .ok_or("malformed context paragraph")?
                .iter()
                .map(|x| x.as_str().map(str::to_string))
                .collect::<Option<Vec<_>>>()
                .ok_or("malformed context sentence")?;
            context.push((title.to_string(), sents));
        }
    }
    Ok(DatasetQuestion {
        question_id,
        question,
        answer,
        gold_titles,
        supporting_facts,
        question_type,
        level,
        context,
    })
}

/// Reads a question-set JSON array. Records with missing fields or without
/// exactly two distinct gold titles are skipped and reported.
pub fn load_dataset(path: &Path, limit: Option<usize>) -> Result<DatasetLoad> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<Value> = serde_json::from_slice(&raw).map_err(|e| Error::Dataset {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut out = DatasetLoad::default();
    for (position, v) in records.iter().enumerate() {
        if limit.is_some_and(|l| out.questions.len() >= l) {
            break;
        }
        match parse_question(v) {
            Ok(q) => out.questions.push(q),
            Err(reason) => {
                let question_id = v.get("_id").and_then(Value::as_str).map(str::to_string);
                warn!(position, ?question_id, %reason, "skipping dataset record");
                out.skipped.push(SkippedRecord {
                    position,
                    question_id,
                    reason,
                });
            }
        }
    }
    info!(loaded = out.questions.len(), skipped = out.skipped.len(), "dataset read");
    Ok(out)
}

/// Writes questions back in the dataset's JSON layout.
pub fn write_dataset(path: &Path, questions: &[DatasetQuestion]) -> Result<()> {
    let records: Vec<Value> = questions
        .iter()
        .map(|q| {
            serde_json::json!({
                "_id": q.question_id,
                "question": q.question,
                "answer": q.answer,
                "supporting_facts": q.supporting_facts,
                "type": q.question_type.as_str(),
                "level": q.level,
                "context": q.context,
            })
        })
        .collect();
    let body = serde_json::to_vec(&records)?;
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

/// Writes documents as dump shards: `shard_docs` JSON lines per file,
/// bzip2-compressed when `compress` is set.
pub fn write_dump(dir: &Path, docs: &[Document], shard_docs: usize, compress: bool) -> Result<Vec<PathBuf>> {
    use std::io::Write;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for (i, chunk) in docs.chunks(shard_docs.max(1)).enumerate() {
        let mut body = Vec::new();
        for d in chunk {
            let line = serde_json::json!({
                "id": d.doc_id.to_string(),
                "url": d.source_url,
                "title": d.title,
                "text": d.sentences,
            });
            serde_json::to_writer(&mut body, &line)?;
            body.push(b'\n');
        }
        let name = if compress { format!("wiki_{i:02}.bz2") } else { format!("wiki_{i:02}.jsonl") };
        let path = dir.join(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        if compress {
            let mut enc = bzip2::write::BzEncoder::new(f, bzip2::Compression::default());
            enc.write_all(&body).map_err(|e| Error::io(&path, e))?;
            enc.finish().map_err(|e| Error::io(&path, e))?;
        } else {
            let mut f = f;
            f.write_all(&body).map_err(|e| Error::io(&path, e))?;
        }
        paths.push(path);
    }
    Ok(paths)
}

/// A desk-scale corpus built from the question set's own paragraphs.
#[derive(Debug, Clone)]
pub struct FixtureCorpus {
    pub documents: Vec<Document>,
    /// The questions whose gold paragraphs are all in `documents`.
    pub questions: Vec<DatasetQuestion>,
}

/// Gold paragraphs of the first `question_count` usable questions plus
/// `distractor_count` other paragraphs drawn (seeded) from every record's
/// context. Titles are unique within the corpus.
pub fn fixture_corpus(
    all: &[DatasetQuestion],
    question_count: usize,
    distractor_count: usize,
    seed: u64,
) -> FixtureCorpus {
    let mut documents: Vec<Document> = Vec::new();
    let mut titles: HashSet<String> = HashSet::new();
    let mut questions = Vec::new();
    for q in all {
        if questions.len() >= question_count {
            break;
        }
        let paras: HashMap<&str, &Vec<String>> = q.context.iter().map(|(t, s)| (t.as_str(), s)).collect();
        let golds: Option<Vec<(&String, &Vec<String>)>> = q
            .gold_titles
            .iter()
            .map(|t| paras.get(t.as_str()).map(|s| (t, *s)))
            .collect();
        let Some(golds) = golds else { continue };
        for (t, s) in golds {
            if titles.insert(t.clone()) {
                documents.push(Document::new(documents.len() as u32, t.clone(), s.clone()));
            }
        }
        questions.push(q.clone());
    }
    let mut pool: Vec<(&String, &Vec<String>)> = Vec::new();
    let mut pool_titles = HashSet::new();
    for q in all {
        for (t, s) in &q.context {
            if !titles.contains(t) && pool_titles.insert(t.as_str()) {
                pool.push((t, s));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    pool.shuffle(&mut rng);
    for (t, s) in pool.into_iter().take(distractor_count) {
        titles.insert(t.clone());
        documents.push(Document::new(documents.len() as u32, t.clone(), s.clone()));
    }
    FixtureCorpus { documents, questions }
}
