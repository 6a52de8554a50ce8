use super::codec::{self, Reader};
use super::Document;
use crate::error::{Error, Result};

/// Verbatim document storage addressed by doc_id.
///
/// Records live in `data` in insertion order; `slots[doc_id]` locates each one.
#[derive(Debug, Clone, Default)]
pub struct DocStore {
    data: Vec<u8>,
    slots: Vec<(u64, u32)>,
}

pub(crate) fn encode_doc(out: &mut Vec<u8>, doc: &Document) {
    codec::put_str(out, &doc.title);
    match &doc.source_url {
        Some(url) => {
            out.push(1);
            codec::put_str(out, url);
        }
        None => out.push(0),
    }
    codec::put_varint(out, doc.sentences.len() as u64);
    for s in &doc.sentences {
        codec::put_str(out, s);
    }
}

impl DocStore {
    pub(crate) fn from_slots(data: Vec<u8>, slots: Vec<(u64, u32)>) -> Self {
        Self { data, slots }
    }

    pub fn len(&self) -> u32 {
        self.slots.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn record(&self, doc_id: u32) -> Option<&[u8]> {
        let &(off, len) = self.slots.get(doc_id as usize)?;
        self.data.get(off as usize..off as usize + len as usize)
    }

    pub fn get(&self, doc_id: u32) -> Option<Document> {
        let mut r = Reader::new(self.record(doc_id)?, "docs.bin");
        let title = r.string().ok()?.to_string();
        let source_url = match r.bytes(1).ok()?[0] {
            1 => Some(r.string().ok()?.to_string()),
            _ => None,
        };
        let n = r.varint().ok()? as usize;
        let sentences = (0..n)
            .map(|_| r.string().map(str::to_string))
            .collect::<Result<Vec<_>>>()
            .ok()?;
        Some(Document {
            doc_id,
            title,
            sentences,
            source_url,
        })
    }

    pub fn title(&self, doc_id: u32) -> Option<String> {
        let mut r = Reader::new(self.record(doc_id)?, "docs.bin");
        r.string().ok().map(str::to_string)
    }

    pub(crate) fn encode_files(&self) -> (Vec<u8>, Vec<u8>) {
        let mut idx = Vec::with_capacity(self.slots.len() * 12);
        for &(off, len) in &self.slots {
            idx.extend_from_slice(&off.to_le_bytes());
            idx.extend_from_slice(&len.to_le_bytes());
        }
        (self.data.clone(), idx)
    }

    pub(crate) fn decode_files(data: Vec<u8>, idx: &[u8]) -> Result<Self> {
        if !idx.len().is_multiple_of(12) {
            return Err(Error::corrupt("docs.idx", "size is not a multiple of 12"));
        }
        let mut r = Reader::new(idx, "docs.idx");
        let mut slots = Vec::with_capacity(idx.len() / 12);
        while !r.is_empty() {
            let off = r.u64_le()?;
            let len = r.u32_le()?;
            if off + u64::from(len) > data.len() as u64 {
                return Err(Error::corrupt("docs.idx", "slot points past docs.bin"));
            }
            slots.push((off, len));
        }
        let store = Self { data, slots };
        // Titles are decoded lazily everywhere else; check them once here.
        for id in 0..store.len() {
            if store.title(id).is_none() {
                return Err(Error::corrupt("docs.bin", format!("record {id} is unreadable")));
            }
        }
        Ok(store)
    }
}
