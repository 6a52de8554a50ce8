//! Inverted index over four analyzed fields with BM25 corpus statistics.
//!
//! # On-disk layout
//!
//! An index directory holds:
//!
//! ```text
//! manifest.json            format version, doc_count, field configs, analyzer hashes,
//!                          and (size, crc32) of every data file
//! stopwords.txt            stop list used at build time
//! asciifold.tsv            folding table used at build time
//! docs.bin / docs.idx      document store and per-doc (offset, len) table
//! lengths.bin              per-field token counts, u32 LE, doc_id order
//! <field>.dict             sorted term dictionary: term, df, postings byte length
//! <field>.post             delta/varint coded (doc_id, tf) postings
//! ```
//!
//! `open` refuses directories whose format version differs, whose files fail
//! size or checksum verification, or whose analyzer files do not hash to the
//! manifest values.

mod codec;
mod store;
mod writer;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textproc::{shingle2, Analyzer, FoldingTable, StopList};

pub use store::DocStore;
pub use writer::{IndexWriter, WriterOptions};

pub(crate) use codec::PostingIter;

pub const FORMAT_VERSION: u32 = 1;

/// One Wikipedia introductory paragraph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: u32,
    pub title: String,
    pub sentences: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
}

impl Document {
    pub fn new(doc_id: u32, title: impl Into<String>, sentences: Vec<String>) -> Self {
        Self {
            doc_id,
            title: title.into(),
            sentences,
            source_url: None,
        }
    }

    /// Searchable body: sentences trimmed and joined with single spaces.
    pub fn text(&self) -> String {
        let mut out = String::new();
        for s in self.sentences.iter().map(|s| s.trim()).filter(|s| !s.is_empty()) {
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(s);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldId {
    Title,
    TitleBigram,
    Text,
    TextBigram,
}

impl FieldId {
    pub const ALL: [FieldId; 4] = [
        FieldId::Title,
        FieldId::TitleBigram,
        FieldId::Text,
        FieldId::TextBigram,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            FieldId::Title => "title",
            FieldId::TitleBigram => "title.bigram",
            FieldId::Text => "text",
            FieldId::TextBigram => "text.bigram",
        }
    }

    pub fn is_title(self) -> bool {
        matches!(self, FieldId::Title | FieldId::TitleBigram)
    }

    pub fn is_bigram(self) -> bool {
        matches!(self, FieldId::TitleBigram | FieldId::TextBigram)
    }

    fn analyzer_name(self) -> &'static str {
        if self.is_title() {
            "simple"
        } else {
            "standard"
        }
    }

    fn dict_file(self) -> &'static str {
        match self {
            FieldId::Title => "title.dict",
            FieldId::TitleBigram => "title.bigram.dict",
            FieldId::Text => "text.dict",
            FieldId::TextBigram => "text.bigram.dict",
        }
    }

    fn post_file(self) -> &'static str {
        match self {
            FieldId::Title => "title.post",
            FieldId::TitleBigram => "title.bigram.post",
            FieldId::Text => "text.post",
            FieldId::TextBigram => "text.bigram.post",
        }
    }
}

/// Analyzed terms of `title` and `text` for each field, in field order.
///
/// Used identically at index time (per document) and at query time (with
/// the query string passed as both arguments).
pub fn analyze_fields(analyzer: &Analyzer, title: &str, text: &str) -> [Vec<String>; 4] {
    let title_tokens = analyzer.simple(title);
    let text_tokens = analyzer.standard(text);
    let title_bigrams = shingle2(&title_tokens);
    let text_bigrams = shingle2(&text_tokens);
    [
        title_tokens.into_iter().map(|t| t.text).collect(),
        title_bigrams,
        text_tokens.into_iter().map(|t| t.text).collect(),
        text_bigrams,
    ]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PostingList {
    pub term: String,
    pub entries: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub total_tokens: u64,
    pub term_count: usize,
    /// Mean tokens per document over all `doc_count` documents.
    pub avgdl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexStats {
    pub doc_count: u32,
    pub fields: [FieldStats; 4],
}

/// Term dictionary and postings of one field.
#[derive(Debug, Clone, Default)]
pub(crate) struct FieldData {
    term_bytes: Vec<u8>,
    term_ends: Vec<u64>,
    doc_freq: Vec<u32>,
    post_ends: Vec<u64>,
    postings: Vec<u8>,
    lengths: Vec<u32>,
    total_len: u64,
}

impl FieldData {
    fn term(&self, i: usize) -> &[u8] {
        let start = if i == 0 { 0 } else { self.term_ends[i - 1] as usize };
        &self.term_bytes[start..self.term_ends[i] as usize]
    }

    fn lookup(&self, term: &str) -> Option<usize> {
        let needle = term.as_bytes();
        let (mut lo, mut hi) = (0usize, self.doc_freq.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.term(mid).cmp(needle) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    fn postings_bytes(&self, i: usize) -> &[u8] {
        let start = if i == 0 { 0 } else { self.post_ends[i - 1] as usize };
        &self.postings[start..self.post_ends[i] as usize]
    }

    fn push_term(&mut self, term: &[u8], entries: &[(u32, u32)]) {
        debug_assert!(self.term_ends.is_empty() || self.term(self.term_ends.len() - 1) < term);
        self.term_bytes.extend_from_slice(term);
        self.term_ends.push(self.term_bytes.len() as u64);
        self.doc_freq.push(entries.len() as u32);
        codec::encode_postings(&mut self.postings, entries);
        self.post_ends.push(self.postings.len() as u64);
    }

    fn encode_dict(&self) -> Vec<u8> {
        let mut out = Vec::new();
        codec::put_varint(&mut out, self.doc_freq.len() as u64);
        let mut prev_post = 0u64;
        for i in 0..self.doc_freq.len() {
            let term = self.term(i);
            codec::put_varint(&mut out, term.len() as u64);
            out.extend_from_slice(term);
            codec::put_varint(&mut out, u64::from(self.doc_freq[i]));
            codec::put_varint(&mut out, self.post_ends[i] - prev_post);
            prev_post = self.post_ends[i];
        }
        out
    }

    fn decode(dict: &[u8], postings: Vec<u8>, field: FieldId) -> Result<Self> {
        let name = field.dict_file();
        let mut r = codec::Reader::new(dict, name);
        let n = usize::try_from(r.varint()?).map_err(|_| Error::corrupt(name, "term count"))?;
        let mut data = FieldData {
            term_ends: Vec::with_capacity(n),
            doc_freq: Vec::with_capacity(n),
            post_ends: Vec::with_capacity(n),
            ..Default::default()
        };
        let mut post_end = 0u64;
        for _ in 0..n {
            let len = r.varint()? as usize;
            let term = r.bytes(len)?;
            if std::str::from_utf8(term).is_err() {
                return Err(Error::corrupt(name, "term is not UTF-8"));
            }
            if !data.term_ends.is_empty() && data.term(data.term_ends.len() - 1) >= term {
                return Err(Error::corrupt(name, "terms not strictly sorted"));
            }
            data.term_bytes.extend_from_slice(term);
            data.term_ends.push(data.term_bytes.len() as u64);
            data.doc_freq.push(r.varint_u32()?);
            post_end += r.varint()?;
            data.post_ends.push(post_end);
        }
        if !r.is_empty() {
            return Err(Error::corrupt(name, format!("trailing bytes at {}", r.position())));
        }
        if post_end != postings.len() as u64 {
            return Err(Error::corrupt(
                field.post_file(),
                "postings length disagrees with dictionary",
            ));
        }
        data.postings = postings;
        Ok(data)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub bytes: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub name: String,
    pub analyzer: String,
    pub bigram: bool,
    pub asciifold: bool,
    pub terms: u64,
    pub total_tokens: u64,
}

/// Contents of `manifest.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub doc_count: u32,
    pub fields: Vec<FieldConfig>,
    pub stoplist_sha256: String,
    pub folding_sha256: String,
    pub duplicate_titles: u64,
    pub files: BTreeMap<String, FileEntry>,
}

/// A built or opened index. Immutable; safe to share across threads.
#[derive(Debug)]
pub struct Index {
    analyzer: Analyzer,
    fields: [FieldData; 4],
    docs: DocStore,
    duplicate_titles: u64,
    titles: OnceLock<HashMap<String, u32>>,
}

impl Index {
    /// Builds an in-memory index from `corpus`. See [`IndexWriter`] for spilling builds.
    pub fn build<I>(corpus: I, analyzer: Analyzer) -> Result<Index>
    where
        I: IntoIterator<Item = Document>,
    {
        let mut writer = IndexWriter::new(analyzer, WriterOptions::default())?;
        writer.add_all(corpus)?;
        writer.finish()
    }

    pub(crate) fn from_parts(
        analyzer: Analyzer,
        fields: [FieldData; 4],
        docs: DocStore,
        duplicate_titles: u64,
    ) -> Self {
        Self {
            analyzer,
            fields,
            docs,
            duplicate_titles,
            titles: OnceLock::new(),
        }
    }

    pub fn analyzer(&self) -> &Analyzer {
        &self.analyzer
    }

    pub fn doc_count(&self) -> u32 {
        self.docs.len()
    }

    pub fn duplicate_titles(&self) -> u64 {
        self.duplicate_titles
    }

    pub fn document(&self, doc_id: u32) -> Option<Document> {
        self.docs.get(doc_id)
    }

    pub fn title(&self, doc_id: u32) -> Option<String> {
        self.docs.title(doc_id)
    }

    /// First document (lowest doc_id) whose title equals `title` exactly.
    pub fn find_by_title(&self, title: &str) -> Option<u32> {
        self.titles
            .get_or_init(|| {
                let mut map = HashMap::with_capacity(self.doc_count() as usize);
                for id in 0..self.doc_count() {
                    if let Some(t) = self.docs.title(id) {
                        map.entry(t).or_insert(id);
                    }
                }
                map
            })
            .get(title)
            .copied()
    }

    pub fn stats(&self) -> IndexStats {
        let n = self.doc_count();
        let fields = FieldId::ALL.map(|f| {
            let data = &self.fields[f.index()];
            FieldStats {
                total_tokens: data.total_len,
                term_count: data.doc_freq.len(),
                avgdl: data.total_len as f64 / f64::from(n.max(1)),
            }
        });
        IndexStats {
            doc_count: n,
            fields,
        }
    }

    pub fn field_length(&self, field: FieldId, doc_id: u32) -> u32 {
        self.fields[field.index()]
            .lengths
            .get(doc_id as usize)
            .copied()
            .unwrap_or(0)
    }

    pub fn doc_freq(&self, field: FieldId, term: &str) -> u32 {
        let data = &self.fields[field.index()];
        data.lookup(term).map_or(0, |i| data.doc_freq[i])
    }

    /// Document frequency and the full posting list; unknown terms give `(0, empty)`.
    pub fn term_stats(&self, field: FieldId, term: &str) -> (u32, PostingList) {
        let data = &self.fields[field.index()];
        match data.lookup(term) {
            Some(i) => (
                data.doc_freq[i],
                PostingList {
                    term: term.to_string(),
                    entries: PostingIter::new(data.postings_bytes(i)).collect(),
                },
            ),
            None => (
                0,
                PostingList {
                    term: term.to_string(),
                    entries: Vec::new(),
                },
            ),
        }
    }

    pub(crate) fn postings(&self, field: FieldId, term: &str) -> Option<(u32, PostingIter<'_>)> {
        let data = &self.fields[field.index()];
        data.lookup(term)
            .map(|i| (data.doc_freq[i], PostingIter::new(data.postings_bytes(i))))
    }

    /// Term frequency of `term` in one document's field (0 when absent).
    pub fn term_frequency(&self, field: FieldId, term: &str, doc_id: u32) -> u32 {
        self.postings(field, term)
            .and_then(|(_, mut it)| it.find(|&(d, _)| d == doc_id))
            .map_or(0, |(_, tf)| tf)
    }

    pub fn manifest(&self) -> Manifest {
        let fields = FieldId::ALL
            .iter()
            .map(|&f| {
                let data = &self.fields[f.index()];
                FieldConfig {
                    name: f.name().to_string(),
                    analyzer: f.analyzer_name().to_string(),
                    bigram: f.is_bigram(),
                    asciifold: true,
                    terms: data.doc_freq.len() as u64,
                    total_tokens: data.total_len,
                }
            })
            .collect();
        Manifest {
            format_version: FORMAT_VERSION,
            doc_count: self.doc_count(),
            fields,
            stoplist_sha256: self.analyzer.stops().fingerprint(),
            folding_sha256: self.analyzer.folding().fingerprint(),
            duplicate_titles: self.duplicate_titles,
            files: BTreeMap::new(),
        }
    }

    /// Writes the index directory, creating it if needed.
    pub fn persist(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut manifest = self.manifest();

        let mut write = |name: &str, bytes: &[u8]| -> Result<()> {
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            manifest.files.insert(
                name.to_string(),
                FileEntry {
                    bytes: bytes.len() as u64,
                    crc32: crc32fast::hash(bytes),
                },
            );
            Ok(())
        };

        write("stopwords.txt", self.analyzer.stops().to_file_contents().as_bytes())?;
        write("asciifold.tsv", self.analyzer.folding().to_file_contents().as_bytes())?;
        let (data, idx) = self.docs.encode_files();
        write("docs.bin", &data)?;
        write("docs.idx", &idx)?;

        let mut lengths = Vec::with_capacity(self.doc_count() as usize * 16);
        for f in FieldId::ALL {
            for &len in &self.fields[f.index()].lengths {
                lengths.extend_from_slice(&len.to_le_bytes());
            }
        }
        write("lengths.bin", &lengths)?;

        for f in FieldId::ALL {
            let data = &self.fields[f.index()];
            write(f.dict_file(), &data.encode_dict())?;
            write(f.post_file(), &data.postings)?;
        }

        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// Opens an index directory with the analyzer recorded in it.
    pub fn open(dir: &Path) -> Result<Index> {
        let manifest_path = dir.join("manifest.json");
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::corrupt("manifest.json", e.to_string()))?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: manifest.format_version,
                expected: FORMAT_VERSION,
            });
        }

        let read = |name: &'static str| -> Result<Vec<u8>> {
            let entry = manifest
                .files
                .get(name)
                .ok_or_else(|| Error::corrupt(name, "missing from manifest"))?;
            let path = dir.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if bytes.len() as u64 != entry.bytes {
                return Err(Error::corrupt(
                    name,
                    format!("expected {} bytes, found {}", entry.bytes, bytes.len()),
                ));
            }
            if crc32fast::hash(&bytes) != entry.crc32 {
                return Err(Error::corrupt(name, "checksum mismatch"));
            }
            Ok(bytes)
        };

        let utf8 = |name: &'static str, bytes: Vec<u8>| {
            String::from_utf8(bytes).map_err(|_| Error::corrupt(name, "not UTF-8"))
        };
        let stops = StopList::parse(&utf8("stopwords.txt", read("stopwords.txt")?)?)?;
        let folding = FoldingTable::parse(&utf8("asciifold.tsv", read("asciifold.tsv")?)?)?;
        if stops.fingerprint() != manifest.stoplist_sha256 {
            return Err(Error::AnalyzerMismatch("stop list hash differs from manifest".into()));
        }
        if folding.fingerprint() != manifest.folding_sha256 {
            return Err(Error::AnalyzerMismatch(
                "folding table hash differs from manifest".into(),
            ));
        }

        let docs = DocStore::decode_files(read("docs.bin")?, &read("docs.idx")?)?;
        let n = docs.len();
        if n != manifest.doc_count {
            return Err(Error::corrupt("docs.idx", "doc_count disagrees with manifest"));
        }

        let lengths_raw = read("lengths.bin")?;
        if lengths_raw.len() != n as usize * 4 * 4 {
            return Err(Error::corrupt("lengths.bin", "unexpected size"));
        }
        let mut lengths_reader = codec::Reader::new(&lengths_raw, "lengths.bin");

        let mut fields: [FieldData; 4] = Default::default();
        for f in FieldId::ALL {
            let dict = read(f.dict_file())?;
            let post = read(f.post_file())?;
            let mut data = FieldData::decode(&dict, post, f)?;
            data.lengths = (0..n)
                .map(|_| lengths_reader.u32_le())
                .collect::<Result<_>>()?;
            data.total_len = data.lengths.iter().map(|&l| u64::from(l)).sum();
            fields[f.index()] = data;
        }

        Ok(Index::from_parts(
            Analyzer::new(stops, folding),
            fields,
            docs,
            manifest.duplicate_titles,
        ))
    }

    /// Opens an index and checks it was built with `expected` analysis settings.
    pub fn open_with(dir: &Path, expected: &Analyzer) -> Result<Index> {
        let index = Index::open(dir)?;
        if index.analyzer.stops() != expected.stops() {
            return Err(Error::AnalyzerMismatch(
                "index was built with a different stop list".into(),
            ));
        }
        if index.analyzer.folding() != expected.folding() {
            return Err(Error::AnalyzerMismatch(
                "index was built with a different folding table".into(),
            ));
        }
        Ok(index)
    }
}
