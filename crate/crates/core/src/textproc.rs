//! Text analysis: tokenization, ascii folding, stop words and bigram shingles.
//!
//! Both analyzers split on every non-alphanumeric character. The `simple`
//! analyzer folds and lowercases; the `standard` analyzer additionally drops
//! stop words. Token offsets always count characters of the *original*
//! input, so any token (or run of tokens) can be quoted back verbatim.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;
use std::sync::{Arc, OnceLock};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");
const DEFAULT_FOLDING: &str = include_str!("../data/asciifold.tsv");

/// One analyzed token with character offsets into the source string.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Token {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
}

/// Immutable set of lowercase stop words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StopList {
    words: HashSet<String>,
}

impl StopList {
    /// Parses one word per line. Blank lines are ignored; entries are lowercased.
    pub fn parse(contents: &str) -> Result<Self> {
        let words: HashSet<String> = contents
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(str::to_lowercase)
            .collect();
        if words.is_empty() {
            return Err(Error::Config("stop list is empty".into()));
        }
        Ok(Self { words })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let contents = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&contents)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Sorted word list, one per line. This is also the persisted form.
    pub fn to_file_contents(&self) -> String {
        let mut words: Vec<&str> = self.words.iter().map(String::as_str).collect();
        words.sort_unstable();
        let mut out = words.join("\n");
        out.push('\n');
        out
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_contents().as_bytes()))
    }
}

impl Default for StopList {
    /// The shipped 33-word English function-word list.
    fn default() -> Self {
        Self::parse(DEFAULT_STOPWORDS).expect("bundled stop list is valid")
    }
}

/// Character-to-ASCII replacement table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldingTable {
    map: HashMap<char, String>,
}

impl FoldingTable {
    /// Parses `source<TAB>replacement` lines; `source` must be a single character.
    pub fn parse(contents: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (lineno, line) in contents.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (src, dst) = line.split_once('\t').ok_or_else(|| {
                Error::Config(format!("folding table line {}: missing tab", lineno + 1))
            })?;
            let mut chars = src.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(Error::Config(format!(
                    "folding table line {}: source must be one character",
                    lineno + 1
                )));
            };
            map.insert(c, dst.to_string());
        }
        Ok(Self { map })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let contents = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&contents)
    }

    pub fn fold(&self, text: &str) -> String {
        if text.is_ascii() {
            return text.to_string();
        }
        let mut out = String::with_capacity(text.len());
        for c in text.chars() {
            match self.map.get(&c) {
                Some(rep) => out.push_str(rep),
                None => out.push(c),
            }
        }
        out
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn to_file_contents(&self) -> String {
        let mut rows: Vec<(char, &str)> = self.map.iter().map(|(c, r)| (*c, r.as_str())).collect();
        rows.sort_unstable();
        rows.iter().map(|(c, r)| format!("{c}\t{r}\n")).collect()
    }

    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.to_file_contents().as_bytes()))
    }
}

impl Default for FoldingTable {
    /// Shipped table covering Latin-1 Supplement, Latin Extended-A and Extended-B.
    fn default() -> Self {
        Self::parse(DEFAULT_FOLDING).expect("bundled folding table is valid")
    }
}

fn default_folding() -> &'static FoldingTable {
    static TABLE: OnceLock<FoldingTable> = OnceLock::new();
    TABLE.get_or_init(FoldingTable::default)
}

/// Folds with the shipped table.
pub fn asciifold(text: &str) -> String {
    default_folding().fold(text)
}

/// Adjacent-pair bigrams rendered as `"a b"`.
pub fn shingle2(tokens: &[Token]) -> Vec<String> {
    tokens
        .windows(2)
        .map(|w| format!("{} {}", w[0].text, w[1].text))
        .collect()
}

/// Analysis configuration shared by indexing, search and oracle generation.
#[derive(Debug, Clone, Default)]
pub struct Analyzer {
    stops: Arc<StopList>,
    folding: Arc<FoldingTable>,
}

impl Analyzer {
    pub fn new(stops: StopList, folding: FoldingTable) -> Self {
        Self {
            stops: Arc::new(stops),
            folding: Arc::new(folding),
        }
    }

    pub fn stops(&self) -> &StopList {
        &self.stops
    }

    pub fn folding(&self) -> &FoldingTable {
        &self.folding
    }

    pub fn fold(&self, text: &str) -> String {
        self.folding.fold(text)
    }

    /// Folded, lowercased form of a raw word.
    pub fn normalize(&self, raw: &str) -> String {
        self.folding.fold(raw).to_lowercase()
    }

    /// Split on non-alphanumerics, fold and lowercase. Keeps stop words.
    pub fn simple(&self, text: &str) -> Vec<Token> {
        self.tokenize(text, false)
    }

    /// As [`Analyzer::simple`], then drops stop words.
    pub fn standard(&self, text: &str) -> Vec<Token> {
        self.tokenize(text, true)
    }

    /// Token sequence used by the overlap heuristics: lowercased, stop-free,
    /// offsets into the original string.
    pub fn clean_for_overlap(&self, text: &str) -> Vec<Token> {
        self.tokenize(text, true)
    }

    fn tokenize(&self, text: &str, drop_stops: bool) -> Vec<Token> {
        let mut out = Vec::new();
        let mut start: Option<(usize, usize)> = None;
        let mut char_idx = 0usize;
        for (byte, c) in text.char_indices() {
            if c.is_alphanumeric() {
                if start.is_none() {
                    start = Some((char_idx, byte));
                }
            } else if let Some((cs, bs)) = start.take() {
                self.emit(&text[bs..byte], cs, char_idx, drop_stops, &mut out);
            }
            char_idx += 1;
        }
        if let Some((cs, bs)) = start {
            self.emit(&text[bs..], cs, char_idx, drop_stops, &mut out);
        }
        out
    }

    fn emit(&self, raw: &str, start: usize, end: usize, drop_stops: bool, out: &mut Vec<Token>) {
        let text = self.normalize(raw);
        if drop_stops && self.stops.contains(&text) {
            return;
        }
        out.push(Token {
            text,
            char_start: start,
            char_end: end,
        });
    }
}

/// Substring of `text` by character offsets `[start, end)`.
///
/// Offsets past the end are clamped.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let bs = indices.by_ref().nth(start).unwrap_or(text.len());
    let be = if end > start {
        indices.nth(end - start - 1).unwrap_or(text.len())
    } else {
        bs
    };
    &text[bs..be]
}
