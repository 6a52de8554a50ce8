//! Segmented index construction.
//!
//! Documents are analyzed in parallel batches and accumulated into an
//! in-memory segment. Full segments are sorted by term and either kept in
//! memory or spilled to disk; `finish` k-way merges all segments per field.
//! The result depends only on the set of documents, never on arrival order.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use tracing::{debug, warn};

use super::codec;
use super::store::{encode_doc, DocStore};
use super::{analyze_fields, Document, FieldData, FieldId, Index};
use crate::error::{Error, Result};
use crate::textproc::Analyzer;

#[derive(Debug, Clone)]
pub struct WriterOptions {
    /// Documents per segment before it is sealed.
    pub segment_docs: usize,
    /// Documents analyzed per parallel batch.
    pub batch_docs: usize,
    /// When set, sealed segments are written here instead of kept in memory.
    pub spill_dir: Option<PathBuf>,
}

impl Default for WriterOptions {
    fn default() -> Self {
        Self {
            segment_docs: 250_000,
            batch_docs: 4096,
            spill_dir: None,
        }
    }
}

enum SegmentField {
    Memory(Vec<u8>),
    Disk(PathBuf),
}

type FieldTerms = Vec<(String, u32)>;

struct Analyzed {
    doc: Document,
    fields: [FieldTerms; 4],
    lengths: [u32; 4],
}

pub struct IndexWriter {
    analyzer: Analyzer,
    opts: WriterOptions,
    pending: Vec<Document>,
    buffer: [HashMap<String, Vec<(u32, u32)>>; 4],
    buffered_docs: usize,
    segments: Vec<[SegmentField; 4]>,
    seen: Vec<u64>,
    doc_count: u32,
    max_id: u32,
    lengths: [Vec<u32>; 4],
    doc_data: Vec<u8>,
    slots: Vec<(u32, u64, u32)>,
    titles: HashSet<String>,
    duplicate_titles: u64,
}

fn count_terms(terms: Vec<String>) -> (FieldTerms, u32) {
    let len = terms.len() as u32;
    let mut counts: HashMap<String, u32> = HashMap::new();
    for t in terms {
        *counts.entry(t).or_insert(0) += 1;
    }
    let mut out: FieldTerms = counts.into_iter().collect();
    out.sort_unstable();
    (out, len)
}

fn read_varint<R: Read>(r: &mut R, file: &str) -> Result<Option<u64>> {
    let mut value = 0u64;
    let mut shift = 0;
    let mut buf = [0u8; 1];
    let mut first = true;
    loop {
        match r.read(&mut buf) {
            Ok(0) if first => return Ok(None),
            Ok(0) => return Err(Error::corrupt(file, "truncated segment")),
            Ok(_) => {}
            Err(e) => return Err(Error::io(file, e)),
        }
        first = false;
        value |= u64::from(buf[0] & 0x7F) << shift;
        if buf[0] & 0x80 == 0 {
            return Ok(Some(value));
        }
        shift += 7;
        if shift > 63 {
            return Err(Error::corrupt(file, "varint overflow"));
        }
    }
}

/// Streams `(term, postings)` from one sealed segment field.
struct SegmentReader {
    inner: Box<dyn Read>,
    name: String,
}

impl SegmentReader {
    fn open(field: &SegmentField) -> Result<Self> {
        match field {
            SegmentField::Memory(bytes) => Ok(Self {
                inner: Box::new(std::io::Cursor::new(bytes.clone())),
                name: "<memory segment>".into(),
            }),
            SegmentField::Disk(path) => {
                let f = File::open(path).map_err(|e| Error::io(path, e))?;
                Ok(Self {
                    inner: Box::new(BufReader::with_capacity(1 << 20, f)),
                    name: path.display().to_string(),
                })
            }
        }
    }

    fn next(&mut self) -> Result<Option<(Vec<u8>, Vec<(u32, u32)>)>> {
        let Some(len) = read_varint(&mut self.inner, &self.name)? else {
            return Ok(None);
        };
        let mut term = vec![0u8; len as usize];
        self.inner
            .read_exact(&mut term)
            .map_err(|e| Error::io(&self.name, e))?;
        let n = read_varint(&mut self.inner, &self.name)?
            .ok_or_else(|| Error::corrupt(&self.name, "truncated segment"))?;
        let mut entries = Vec::with_capacity(n as usize);
        let mut prev = 0u32;
        for i in 0..n {
            let delta = read_varint(&mut self.inner, &self.name)?
                .ok_or_else(|| Error::corrupt(&self.name, "truncated segment"))?;
            let tf = read_varint(&mut self.inner, &self.name)?
                .ok_or_else(|| Error::corrupt(&self.name, "truncated segment"))?;
            let doc = if i == 0 { delta as u32 } else { prev + delta as u32 };
            entries.push((doc, tf as u32));
            prev = doc;
        }
        Ok(Some((term, entries)))
    }
}

impl IndexWriter {
    pub fn new(analyzer: Analyzer, opts: WriterOptions) -> Result<Self> {
        if let Some(dir) = &opts.spill_dir {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        Ok(Self {
            analyzer,
            opts,
            pending: Vec::new(),
            buffer: Default::default(),
            buffered_docs: 0,
            segments: Vec::new(),
            seen: Vec::new(),
            doc_count: 0,
            max_id: 0,
            lengths: Default::default(),
            doc_data: Vec::new(),
            slots: Vec::new(),
            titles: HashSet::new(),
            duplicate_titles: 0,
        })
    }

    pub fn add(&mut self, doc: Document) -> Result<()> {
        let id = doc.doc_id;
        let (word, bit) = (id as usize / 64, id % 64);
        if word >= self.seen.len() {
            self.seen.resize(word + 1, 0);
        }
        if self.seen[word] & (1 << bit) != 0 {
            return Err(Error::DuplicateDocId(id));
        }
        if doc.title.is_empty() {
            return Err(Error::EmptyTitle(id));
        }
        self.seen[word] |= 1 << bit;
        self.doc_count += 1;
        self.max_id = self.max_id.max(id);
        self.pending.push(doc);
        if self.pending.len() >= self.opts.batch_docs {
            self.flush_batch()?;
        }
        Ok(())
    }

    pub fn add_all<I: IntoIterator<Item = Document>>(&mut self, docs: I) -> Result<()> {
        docs.into_iter().try_for_each(|d| self.add(d))
    }

    /// Like [`IndexWriter::add_all`] but for fallible streams such as dump readers.
    pub fn add_stream<I, E>(&mut self, docs: I) -> std::result::Result<(), E>
    where
        I: IntoIterator<Item = std::result::Result<Document, E>>,
        E: From<Error>,
    {
        for d in docs {
            self.add(d?)?;
        }
        Ok(())
    }

    fn flush_batch(&mut self) -> Result<()> {
        if self.pending.is_empty() {
            return Ok(());
        }
        let analyzer = &self.analyzer;
        let batch: Vec<Analyzed> = std::mem::take(&mut self.pending)
            .into_par_iter()
            .map(|doc| {
                let [a, b, c, d] = analyze_fields(analyzer, &doc.title, &doc.text());
                let (a, la) = count_terms(a);
                let (b, lb) = count_terms(b);
                let (c, lc) = count_terms(c);
                let (d, ld) = count_terms(d);
                Analyzed {
                    doc,
                    fields: [a, b, c, d],
                    lengths: [la, lb, lc, ld],
                }
            })
            .collect();

        for item in batch {
            let id = item.doc.doc_id;
            for (f, terms) in item.fields.into_iter().enumerate() {
                let lens = &mut self.lengths[f];
                if lens.len() <= id as usize {
                    lens.resize(id as usize + 1, 0);
                }
                lens[id as usize] = item.lengths[f];
                for (term, tf) in terms {
                    self.buffer[f].entry(term).or_default().push((id, tf));
                }
            }
            if !self.titles.insert(item.doc.title.clone()) {
                self.duplicate_titles += 1;
                debug!(title = %item.doc.title, doc_id = id, "duplicate title");
            }
            let off = self.doc_data.len() as u64;
            encode_doc(&mut self.doc_data, &item.doc);
            let len = (self.doc_data.len() as u64 - off) as u32;
            self.slots.push((id, off, len));
            self.buffered_docs += 1;
        }
        if self.buffered_docs >= self.opts.segment_docs {
            self.seal_segment()?;
        }
        Ok(())
    }

    fn seal_segment(&mut self) -> Result<()> {
        if self.buffered_docs == 0 {
            return Ok(());
        }
        let seg_no = self.segments.len();
        let mut sealed = Vec::with_capacity(4);
        for f in FieldId::ALL {
            let map = std::mem::take(&mut self.buffer[f.index()]);
            let mut terms: Vec<(String, Vec<(u32, u32)>)> = map.into_iter().collect();
            terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            let mut bytes = Vec::new();
            for (term, mut entries) in terms {
                if !entries.is_sorted_by_key(|e| e.0) {
                    entries.sort_unstable_by_key(|e| e.0);
                }
                codec::put_str(&mut bytes, &term);
                codec::put_varint(&mut bytes, entries.len() as u64);
                codec::encode_postings(&mut bytes, &entries);
            }
            sealed.push(match &self.opts.spill_dir {
                Some(dir) => {
                    let path = dir.join(format!("segment-{seg_no:05}-{}.seg", f.name()));
                    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
                    let mut w = BufWriter::new(file);
                    w.write_all(&bytes)
                        .and_then(|_| w.flush())
                        .map_err(|e| Error::io(&path, e))?;
                    SegmentField::Disk(path)
                }
                None => SegmentField::Memory(bytes),
            });
        }
        debug!(segment = seg_no, docs = self.buffered_docs, "sealed segment");
        self.buffered_docs = 0;
        let sealed: [SegmentField; 4] = sealed.try_into().ok().expect("four fields");
        self.segments.push(sealed);
        Ok(())
    }

    fn merge_field(&self, f: FieldId) -> Result<FieldData> {
        let mut readers = self
            .segments
            .iter()
            .map(|s| SegmentReader::open(&s[f.index()]))
            .collect::<Result<Vec<_>>>()?;
        let mut heads: Vec<Option<(Vec<u8>, Vec<(u32, u32)>)>> = Vec::with_capacity(readers.len());
        let mut heap = BinaryHeap::new();
        for (i, r) in readers.iter_mut().enumerate() {
            let head = r.next()?;
            if let Some((term, _)) = &head {
                heap.push(Reverse((term.clone(), i)));
            }
            heads.push(head);
        }

        let mut data = FieldData::default();
        while let Some(Reverse((term, first))) = heap.pop() {
            let mut group = vec![first];
            while heap.peek().is_some_and(|Reverse((t, _))| *t == term) {
                let Reverse((_, i)) = heap.pop().expect("peeked");
                group.push(i);
            }
            let mut entries = Vec::new();
            for i in group {
                let (_, postings) = heads[i].take().expect("head present");
                entries.extend(postings);
                heads[i] = readers[i].next()?;
                if let Some((t, _)) = &heads[i] {
                    heap.push(Reverse((t.clone(), i)));
                }
            }
            if !entries.is_sorted_by_key(|e| e.0) {
                entries.sort_unstable_by_key(|e| e.0);
            }
            data.push_term(&term, &entries);
        }
        Ok(data)
    }

    /// Seals the last segment, merges all segments and returns the index.
    pub fn finish(mut self) -> Result<Index> {
        self.flush_batch()?;
        self.seal_segment()?;
        if self.doc_count == 0 {
            return Err(Error::EmptyCorpus);
        }
        if self.max_id + 1 != self.doc_count {
            let missing = (0..=self.max_id)
                .find(|&id| self.seen[id as usize / 64] & (1 << (id % 64)) == 0)
                .unwrap_or(self.doc_count);
            return Err(Error::NonDenseDocIds {
                count: self.doc_count,
                missing,
            });
        }

        let n = self.doc_count as usize;
        let mut fields: [FieldData; 4] = Default::default();
        for f in FieldId::ALL {
            let mut data = self.merge_field(f)?;
            let mut lengths = std::mem::take(&mut self.lengths[f.index()]);
            lengths.resize(n, 0);
            data.total_len = lengths.iter().map(|&l| u64::from(l)).sum();
            data.lengths = lengths;
            fields[f.index()] = data;
        }

        for seg in &self.segments {
            for field in seg {
                if let SegmentField::Disk(path) = field {
                    if let Err(e) = fs::remove_file(path) {
                        warn!(path = %path.display(), error = %e, "could not remove spill file");
                    }
                }
            }
        }

        let mut slots = vec![(0u64, 0u32); n];
        for &(id, off, len) in &self.slots {
            slots[id as usize] = (off, len);
        }
        let docs = DocStore::from_slots(std::mem::take(&mut self.doc_data), slots);
        Ok(Index::from_parts(
            self.analyzer.clone(),
            fields,
            docs,
            self.duplicate_titles,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<Document> {
        (0..40u32)
            .map(|i| {
                Document::new(
                    i,
                    format!("Title {}", i % 7),
                    vec![format!("word{} shared text number {}", i % 5, i % 3)],
                )
            })
            .collect()
    }

    #[test]
    fn spilled_segments_match_single_segment() {
        let single = Index::build(corpus(), Analyzer::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut w = IndexWriter::new(
            Analyzer::default(),
            WriterOptions {
                segment_docs: 6,
                batch_docs: 4,
                spill_dir: Some(dir.path().to_path_buf()),
            },
        )
        .unwrap();
        let mut docs = corpus();
        docs.reverse();
        w.add_all(docs).unwrap();
        let multi = w.finish().unwrap();
        assert_eq!(single.stats(), multi.stats());
        for f in FieldId::ALL {
            for t in ["shared", "title", "word3", "shared text", "title 3", "0"] {
                assert_eq!(single.term_stats(f, t), multi.term_stats(f, t));
            }
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
