//! Varint and delta coding for postings and on-disk tables.

use crate::error::{Error, Result};

pub(crate) fn put_varint(out: &mut Vec<u8>, mut value: u64) {
    loop {
        let byte = (value & 0x7F) as u8;
        value >>= 7;
        if value == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

pub(crate) fn put_str(out: &mut Vec<u8>, s: &str) {
    put_varint(out, s.len() as u64);
    out.extend_from_slice(s.as_bytes());
}

/// Appends `(doc_id, tf)` pairs as delta-coded varints. Entries must ascend by doc_id.
pub(crate) fn encode_postings(out: &mut Vec<u8>, entries: &[(u32, u32)]) {
    let mut prev = 0u32;
    for (i, &(doc, tf)) in entries.iter().enumerate() {
        debug_assert!(i == 0 || doc > prev);
        let delta = if i == 0 { doc } else { doc - prev };
        put_varint(out, u64::from(delta));
        put_varint(out, u64::from(tf));
        prev = doc;
    }
}

/// Decodes a posting list written by [`encode_postings`]. Stops at the first
/// malformed entry; callers verify file checksums before trusting the bytes.
pub(crate) struct PostingIter<'a> {
    bytes: &'a [u8],
    pos: usize,
    prev: u32,
    first: bool,
}

impl<'a> PostingIter<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self {
            bytes,
            pos: 0,
            prev: 0,
            first: true,
        }
    }

    fn varint(&mut self) -> Option<u64> {
        let mut value = 0u64;
        let mut shift = 0;
        loop {
            let byte = *self.bytes.get(self.pos)?;
            self.pos += 1;
            value |= u64::from(byte & 0x7F) << shift;
            if byte & 0x80 == 0 {
                return Some(value);
            }
            shift += 7;
            if shift > 63 {
                return None;
            }
        }
    }
}

impl Iterator for PostingIter<'_> {
    type Item = (u32, u32);

    fn next(&mut self) -> Option<(u32, u32)> {
        if self.pos >= self.bytes.len() {
            return None;
        }
        let delta = u32::try_from(self.varint()?).ok()?;
        let tf = u32::try_from(self.varint()?).ok()?;
        let doc = if self.first { delta } else { self.prev.checked_add(delta)? };
        self.first = false;
        self.prev = doc;
        Some((doc, tf))
    }
}

/// Bounds-checked reader over a byte slice; every short read is a corruption error.
pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    file: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8], file: &'static str) -> Self {
        Self { bytes, pos: 0, file }
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.pos >= self.bytes.len()
    }

    pub(crate) fn position(&self) -> usize {
        self.pos
    }

    fn fail(&self, reason: &str) -> Error {
        Error::corrupt(self.file, format!("{reason} at byte {}", self.pos))
    }

    pub(crate) fn varint(&mut self) -> Result<u64> {
        let mut value = 0u64;
        let mut shift = 0;
        loop {
            let byte = *self
                .bytes
                .get(self.pos)
                .ok_or_else(|| self.fail("unexpected end of data"))?;
            self.pos += 1;
            value |= u64::from(byte & 0x7F) << shift;
            if byte & 0x80 == 0 {
                return Ok(value);
            }
            shift += 7;
            if shift > 63 {
                return Err(self.fail("varint overflow"));
            }
        }
    }

    pub(crate) fn varint_u32(&mut self) -> Result<u32> {
        let v = self.varint()?;
        u32::try_from(v).map_err(|_| self.fail("value exceeds u32"))
    }

    pub(crate) fn bytes(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.fail("unexpected end of data"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn string(&mut self) -> Result<&'a str> {
        let len = usize::try_from(self.varint()?).map_err(|_| self.fail("length overflow"))?;
        let raw = self.bytes(len)?;
        std::str::from_utf8(raw).map_err(|_| self.fail("invalid UTF-8"))
    }

    pub(crate) fn u32_le(&mut self) -> Result<u32> {
        let raw = self.bytes(4)?;
        Ok(u32::from_le_bytes(raw.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64_le(&mut self) -> Result<u64> {
        let raw = self.bytes(8)?;
        Ok(u64::from_le_bytes(raw.try_into().expect("8 bytes")))
    }
}
