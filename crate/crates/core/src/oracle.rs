//! Oracle query derivation.
//!
//! Given a retrieval context and the gold document the next hop should
//! find, three lexical-overlap heuristics propose contiguous spans of the
//! context as search queries:
//!
//! - longest common subsequence of cleaned tokens, widened to the context
//!   span that contains every matched token;
//! - longest common substring (contiguous run) of cleaned tokens;
//! - overlap merging: the longest window whose share of tokens found in the
//!   target reaches `min_ratio`.
//!
//! Each heuristic runs on every (context variant x target variant) pair.
//! The context variants differ in punctuation handling: `Cleaned` treats
//! clause punctuation as a hard boundary, `NoPunctuation` lets spans cross
//! it. Title delimiters of a serialized context are always boundaries.
//! Candidates are then ranked by where they actually place the gold
//! document in search results.

use std::collections::HashSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{Document, Index};
use crate::pipeline::{TITLE_CLOSE, TITLE_OPEN};
use crate::ranking::{retrieve_hits, RankingParams};
use crate::textproc::{char_slice, Analyzer, Token};

/// Characters that end a span in the `Cleaned` context variant.
pub const BOUNDARY_PUNCTUATION: &[char] = &[
    ',', ';', ':', '.', '?', '!', '(', ')', '[', ']', '{', '}', '"', '\u{201c}', '\u{201d}', '\u{2026}',
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Lcs,
    LcSubstr,
    OverlapMerge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextVariant {
    Cleaned,
    NoPunctuation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetVariant {
    Title,
    Paragraph,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceCombo {
    pub context: ContextVariant,
    pub target: TargetVariant,
}

/// A contiguous span of the context proposed as a query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanCandidate {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    pub heuristic: Heuristic,
    pub source_combo: SourceCombo,
    /// Cleaned context tokens matched against the target.
    pub overlap: usize,
    /// Cleaned tokens covered by the span.
    pub span_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleQuery {
    pub question_id: String,
    pub hop: usize,
    pub gold_doc_id: u32,
    pub gold_title: String,
    pub span: SpanCandidate,
    /// 1-based rank of the gold document; `None` when it is outside the pool.
    pub gold_rank: Option<usize>,
    pub gold_score: Option<f64>,
    /// Set when no candidate brought the gold document into the pool.
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    pub min_ratio: f64,
    /// Paragraph targets are truncated to this many cleaned tokens.
    pub target_token_cap: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            min_ratio: 0.6,
            target_token_cap: 512,
        }
    }
}

/// Matched region of a cleaned token sequence: tokens `first..=last`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenMatch {
    pub first: usize,
    pub last: usize,
    pub overlap: usize,
}

/// Longest common subsequence of token texts; returns the matched context
/// region (first to last matched token) and the LCS length.
pub fn lcs_match(context: &[&str], target: &[&str]) -> Option<TokenMatch> {
    let (n, m) = (context.len(), target.len());
    if n == 0 || m == 0 {
        return None;
    }
    // Suffix table: dp[i][j] = LCS(context[i..], target[j..]).
    let w = m + 1;
    let mut dp = vec![0u32; (n + 1) * w];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i * w + j] = if context[i] == target[j] {
                dp[(i + 1) * w + j + 1] + 1
            } else {
                dp[(i + 1) * w + j].max(dp[i * w + j + 1])
            };
        }
    }
    let len = dp[0] as usize;
    if len == 0 {
        return None;
    }
    let (mut i, mut j) = (0, 0);
    let (mut first, mut last) = (None, 0);
    while i < n && j < m {
        if context[i] == target[j] {
            first.get_or_insert(i);
            last = i;
            i += 1;
            j += 1;
        } else if dp[(i + 1) * w + j] >= dp[i * w + j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    Some(TokenMatch {
        first: first.expect("len > 0"),
        last,
        overlap: len,
    })
}

/// Longest common contiguous run; ties go to the earliest context position.
pub fn lcsubstr_match(context: &[&str], target: &[&str]) -> Option<TokenMatch> {
    let m = target.len();
    if context.is_empty() || m == 0 {
        return None;
    }
    let mut prev = vec![0u32; m + 1];
    let mut cur = vec![0u32; m + 1];
    let (mut best, mut best_end) = (0u32, 0usize);
    for (i, c) in context.iter().enumerate() {
        for j in 0..m {
            cur[j + 1] = if *c == target[j] { prev[j] + 1 } else { 0 };
            if cur[j + 1] > best {
                best = cur[j + 1];
                best_end = i;
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    (best > 0).then(|| TokenMatch {
        first: best_end + 1 - best as usize,
        last: best_end,
        overlap: best as usize,
    })
}

/// Longest window that starts and ends on target tokens and whose share of
/// target tokens is at least `min_ratio`. Ties: higher ratio, then earlier.
pub fn overlap_merge_match(context: &[&str], target: &[&str], min_ratio: f64) -> Option<TokenMatch> {
    let vocab: HashSet<&str> = target.iter().copied().collect();
    let hits: Vec<usize> = (0..context.len()).filter(|&i| vocab.contains(context[i])).collect();
    let mut best: Option<(usize, usize, usize)> = None; // (first, last, overlap)
    for a in 0..hits.len() {
        for b in a..hits.len() {
            let len = hits[b] - hits[a] + 1;
            let overlap = b - a + 1;
            if (overlap as f64) / (len as f64) < min_ratio {
                continue;
            }
            let better = match best {
                None => true,
                Some((f, l, o)) => {
                    let best_len = l - f + 1;
                    // overlap/len > o/best_len, compared without division
                    len > best_len || (len == best_len && overlap * best_len > o * len)
                }
            };
            if better {
                best = Some((hits[a], hits[b], overlap));
            }
        }
    }
    best.map(|(first, last, overlap)| TokenMatch {
        first,
        last,
        overlap,
    })
}

/// Cleaned context tokens split into boundary-free segments.
#[derive(Debug, Clone)]
pub struct SegmentedContext {
    pub tokens: Vec<Token>,
    pub segments: Vec<Range<usize>>,
}

impl SegmentedContext {
    pub fn new(analyzer: &Analyzer, context: &str, variant: ContextVariant) -> Self {
        let chars: Vec<char> = context.chars().collect();
        // Mark title delimiters (never tokens, always boundaries) and punctuation.
        let mut markup = vec![false; chars.len()];
        let mut boundary = vec![false; chars.len()];
        for tag in [TITLE_OPEN, TITLE_CLOSE] {
            let tag: Vec<char> = tag.chars().collect();
            let mut i = 0;
            while i + tag.len() <= chars.len() {
                if chars[i..i + tag.len()] == tag[..] {
                    for k in i..i + tag.len() {
                        markup[k] = true;
                        boundary[k] = true;
                    }
                    i += tag.len();
                } else {
                    i += 1;
                }
            }
        }
        if variant == ContextVariant::Cleaned {
            for (k, c) in chars.iter().enumerate() {
                if BOUNDARY_PUNCTUATION.contains(c) {
                    boundary[k] = true;
                }
            }
        }
        let mut boundaries_before = vec![0usize; chars.len() + 1];
        for k in 0..chars.len() {
            boundaries_before[k + 1] = boundaries_before[k] + usize::from(boundary[k]);
        }

        let tokens: Vec<Token> = analyzer
            .clean_for_overlap(context)
            .into_iter()
            .filter(|t| !markup[t.char_start..t.char_end].iter().any(|&m| m))
            .collect();

        let mut segments = Vec::new();
        let mut start = 0;
        for k in 1..=tokens.len() {
            let split = k == tokens.len()
                || boundaries_before[tokens[k].char_start] > boundaries_before[tokens[k - 1].char_end];
            if split {
                segments.push(start..k);
                start = k;
            }
        }
        Self { tokens, segments }
    }
}

fn cleaned_texts(tokens: &[Token]) -> Vec<&str> {
    tokens.iter().map(|t| t.text.as_str()).collect()
}

/// Best match of `heuristic` over all segments. Segment results compete by
/// the heuristic's own preference order; earlier segments win ties.
fn best_over_segments(
    ctx: &SegmentedContext,
    target: &[&str],
    heuristic: Heuristic,
    min_ratio: f64,
) -> Option<TokenMatch> {
    let mut best: Option<TokenMatch> = None;
    for seg in &ctx.segments {
        let texts = cleaned_texts(&ctx.tokens[seg.clone()]);
        let found = match heuristic {
            Heuristic::Lcs => lcs_match(&texts, target),
            Heuristic::LcSubstr => lcsubstr_match(&texts, target),
            Heuristic::OverlapMerge => overlap_merge_match(&texts, target, min_ratio),
        };
        let Some(mut m) = found else { continue };
        m.first += seg.start;
        m.last += seg.start;
        let better = match &best {
            None => true,
            Some(b) => match heuristic {
                Heuristic::Lcs | Heuristic::LcSubstr => m.overlap > b.overlap,
                Heuristic::OverlapMerge => {
                    let (ml, bl) = (m.last - m.first + 1, b.last - b.first + 1);
                    ml > bl || (ml == bl && m.overlap * bl > b.overlap * ml)
                }
            },
        };
        if better {
            best = Some(m);
        }
    }
    best
}

fn to_candidate(
    context: &str,
    ctx: &SegmentedContext,
    m: TokenMatch,
    heuristic: Heuristic,
    source_combo: SourceCombo,
) -> SpanCandidate {
    let char_start = ctx.tokens[m.first].char_start;
    let char_end = ctx.tokens[m.last].char_end;
    SpanCandidate {
        text: char_slice(context, char_start, char_end).to_string(),
        char_start,
        char_end,
        heuristic,
        source_combo,
        overlap: m.overlap,
        span_tokens: m.last - m.first + 1,
    }
}

/// Runs one heuristic for one combo; the building block of [`candidate_queries`].
pub fn heuristic_span(
    context: &str,
    ctx: &SegmentedContext,
    target: &[Token],
    heuristic: Heuristic,
    source_combo: SourceCombo,
    min_ratio: f64,
) -> Option<SpanCandidate> {
    let target = cleaned_texts(target);
    best_over_segments(ctx, &target, heuristic, min_ratio)
        .map(|m| to_candidate(context, ctx, m, heuristic, source_combo))
}

fn no_punct(analyzer: &Analyzer, context: &str) -> SegmentedContext {
    SegmentedContext::new(analyzer, context, ContextVariant::NoPunctuation)
}

/// LCS span of `context` against `target` (punctuation does not split spans).
pub fn lcs_span(analyzer: &Analyzer, context: &str, target: &str) -> Option<SpanCandidate> {
    let combo = SourceCombo {
        context: ContextVariant::NoPunctuation,
        target: TargetVariant::Paragraph,
    };
    let target = analyzer.clean_for_overlap(target);
    heuristic_span(context, &no_punct(analyzer, context), &target, Heuristic::Lcs, combo, 1.0)
}

/// Longest-common-substring span of `context` against `target`.
pub fn lcsubstr_span(analyzer: &Analyzer, context: &str, target: &str) -> Option<SpanCandidate> {
    let combo = SourceCombo {
        context: ContextVariant::NoPunctuation,
        target: TargetVariant::Paragraph,
    };
    let target = analyzer.clean_for_overlap(target);
    heuristic_span(context, &no_punct(analyzer, context), &target, Heuristic::LcSubstr, combo, 1.0)
}

/// Overlap-merge span of `context` against `target`.
pub fn overlap_merge_span(
    analyzer: &Analyzer,
    context: &str,
    target: &str,
    min_ratio: f64,
) -> Option<SpanCandidate> {
    let combo = SourceCombo {
        context: ContextVariant::NoPunctuation,
        target: TargetVariant::Paragraph,
    };
    let target = analyzer.clean_for_overlap(target);
    heuristic_span(
        context,
        &no_punct(analyzer, context),
        &target,
        Heuristic::OverlapMerge,
        combo,
        min_ratio,
    )
}

/// All heuristics over {cleaned, no-punctuation} context x {title, paragraph}
/// target, deduplicated by span offsets. Offsets index `context` as given.
pub fn candidate_queries(
    analyzer: &Analyzer,
    context: &str,
    gold: &Document,
    opts: &OracleOptions,
) -> Vec<SpanCandidate> {
    let mut targets = Vec::with_capacity(2);
    let title_tokens = analyzer.clean_for_overlap(&gold.title);
    if !gold.title.trim().is_empty() {
        targets.push((TargetVariant::Title, title_tokens));
    }
    let mut para = analyzer.clean_for_overlap(&gold.text());
    para.truncate(opts.target_token_cap);
    targets.push((TargetVariant::Paragraph, para));

    let mut out: Vec<SpanCandidate> = Vec::new();
    let mut seen = HashSet::new();
    for variant in [ContextVariant::Cleaned, ContextVariant::NoPunctuation] {
        let ctx = SegmentedContext::new(analyzer, context, variant);
        for (target_variant, target) in &targets {
            let combo = SourceCombo {
                context: variant,
                target: *target_variant,
            };
            for heuristic in [Heuristic::Lcs, Heuristic::LcSubstr, Heuristic::OverlapMerge] {
                if let Some(c) = heuristic_span(context, &ctx, target, heuristic, combo, opts.min_ratio) {
                    if seen.insert((c.char_start, c.char_end)) {
                        out.push(c);
                    }
                }
            }
        }
    }
    out
}

/// Executes each candidate and keeps the one that ranks the gold document best.
///
/// Order: ascending gold rank (absent last), then higher gold score, then
/// fewer query tokens, then earlier span start.
pub fn select_oracle(
    question_id: &str,
    hop: usize,
    candidates: &[SpanCandidate],
    gold_doc_id: u32,
    index: &Index,
    params: &RankingParams,
) -> Result<OracleQuery> {
    if candidates.is_empty() {
        return Err(Error::NoOracle {
            question_id: question_id.to_string(),
            hop,
        });
    }
    struct Scored<'a> {
        cand: &'a SpanCandidate,
        rank: Option<usize>,
        score: Option<f64>,
        query_tokens: usize,
    }
    let mut scored: Vec<Scored<'_>> = candidates
        .iter()
        .map(|cand| {
            let hits = retrieve_hits(index, &cand.text, params.rerank_pool, params);
            let pos = hits.iter().position(|h| h.doc_id == gold_doc_id);
            Scored {
                cand,
                rank: pos.map(|p| p + 1),
                score: pos.map(|p| hits[p].boosted_score),
                query_tokens: index.analyzer().simple(&cand.text).len(),
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        a.rank
            .unwrap_or(usize::MAX)
            .cmp(&b.rank.unwrap_or(usize::MAX))
            .then_with(|| {
                let (x, y) = (a.score.unwrap_or(f64::NEG_INFINITY), b.score.unwrap_or(f64::NEG_INFINITY));
                y.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Equal)
            })
            .then(a.query_tokens.cmp(&b.query_tokens))
            .then(a.cand.char_start.cmp(&b.cand.char_start))
            .then(a.cand.char_end.cmp(&b.cand.char_end))
    });
    let best = &scored[0];
    Ok(OracleQuery {
        question_id: question_id.to_string(),
        hop,
        gold_doc_id,
        gold_title: index.title(gold_doc_id).unwrap_or_default(),
        span: best.cand.clone(),
        gold_rank: best.rank,
        gold_score: best.score,
        flagged: best.rank.is_none(),
    })
}

/// Candidate generation plus selection for one (context, gold document) pair.
pub fn derive_oracle(
    index: &Index,
    question_id: &str,
    hop: usize,
    context: &str,
    gold: &Document,
    params: &RankingParams,
    opts: &OracleOptions,
) -> Result<OracleQuery> {
    let candidates = candidate_queries(index.analyzer(), context, gold, opts);
    select_oracle(question_id, hop, &candidates, gold.doc_id, index, params)
}

/// One line of the oracle JSON-lines export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRecord {
    pub question_id: String,
    pub hop: usize,
    /// The span text; also the `query` field read by external generators.
    pub query: String,
    pub char_start: usize,
    pub char_end: usize,
    pub heuristic: Heuristic,
    pub source_combo: SourceCombo,
    pub gold_title: String,
    pub gold_rank: Option<usize>,
    pub flagged: bool,
}

impl From<&OracleQuery> for OracleRecord {
    fn from(q: &OracleQuery) -> Self {
        Self {
            question_id: q.question_id.clone(),
            hop: q.hop,
            query: q.span.text.clone(),
            char_start: q.span.char_start,
            char_end: q.span.char_end,
            heuristic: q.span.heuristic,
            source_combo: q.span.source_combo,
            gold_title: q.gold_title.clone(),
            gold_rank: q.gold_rank,
            flagged: q.flagged,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: u32, title: &str, text: &str) -> Document {
        Document::new(id, title, vec![text.to_string()])
    }

    const CONTEXT: &str = "the SilvEr Fetcher model on TriviaQA";
    const TARGET: &str = "SilvEr Fetcher on the TriviaQA dataset";

    #[test]
    fn lcs_worked_example() {
        let a = Analyzer::default();
        let c = lcs_span(&a, CONTEXT, TARGET).unwrap();
        assert_eq!(c.text, "SilvEr Fetcher model on TriviaQA");
        assert_eq!(c.overlap, 3);
        assert!(lcs_span(&a, "alpha beta", "gamma delta").is_none());
        let whole = lcs_span(&a, "Giuseppe Verdi opera", "Giuseppe Verdi opera").unwrap();
        assert_eq!(whole.text, "Giuseppe Verdi opera");
    }

    #[test]
    fn lcsubstr_examples() {
        let a = Analyzer::default();
        let q = "Are Giuseppe Verdi and Ambroise Thomas both Opera composers?";
        assert_eq!(lcsubstr_span(&a, q, "Giuseppe Verdi").unwrap().text, "Giuseppe Verdi");
        let single = lcsubstr_span(&a, "red fox", "fox hunt").unwrap();
        assert_eq!((single.text.as_str(), single.overlap), ("fox", 1));
        assert!(lcsubstr_span(&a, "red fox", "blue hen").is_none());
    }

    #[test]
    fn lcsubstr_tie_is_earliest() {
        let m = lcsubstr_match(&["a", "b", "x", "c", "d"], &["c", "d", "a", "b"]).unwrap();
        assert_eq!((m.first, m.last), (0, 1));
    }

    #[test]
    fn overlap_merge_examples() {
        let a = Analyzer::default();
        let c = overlap_merge_span(&a, CONTEXT, TARGET, 0.6).unwrap();
        assert_eq!(c.text, "SilvEr Fetcher model on TriviaQA");
        assert_eq!((c.overlap, c.span_tokens), (3, 4));
        let strict = overlap_merge_span(&a, CONTEXT, TARGET, 1.0).unwrap();
        assert_eq!(strict.text, "SilvEr Fetcher");
        assert!(overlap_merge_span(&a, CONTEXT, "", 0.6).is_none());
    }

    #[test]
    fn punctuation_variant_splits_spans() {
        let a = Analyzer::default();
        let ctx = "group of Jeffrey Jey, Maurizio Lobina and Gabry Ponte";
        let cleaned = SegmentedContext::new(&a, ctx, ContextVariant::Cleaned);
        let loose = SegmentedContext::new(&a, ctx, ContextVariant::NoPunctuation);
        assert_eq!(cleaned.segments.len(), 2);
        assert_eq!(loose.segments.len(), 1);
    }

    #[test]
    fn markup_is_never_part_of_a_span() {
        let a = Analyzer::default();
        let ctx = "Who wrote it? <t>Armada (novel)</t> Armada is a novel by Ernest Cline.";
        let seg = SegmentedContext::new(&a, ctx, ContextVariant::NoPunctuation);
        assert!(seg.tokens.iter().all(|t| t.text != "t"));
        assert_eq!(seg.segments.len(), 3);
        let gold = doc(0, "Ernest Cline", "Ernest Cline is an American novelist.");
        for c in candidate_queries(&a, ctx, &gold, &OracleOptions::default()) {
            assert!(!c.text.contains('<') && !c.text.contains('>'), "{}", c.text);
        }
    }

    #[test]
    fn table_one_candidates() {
        let a = Analyzer::default();
        let q = "Scott Parkin has been a vocal critic of Exxonmobil and another corporation that has operations in how many countries?";
        let gold = doc(0, "Scott Parkin", "Scott Parkin is an anti-war activist.");
        let cands = candidate_queries(&a, q, &gold, &OracleOptions::default());
        assert!(cands.iter().any(|c| c.text == "Scott Parkin"));

        let ctx = "What government position was held by the woman who portrayed Corliss Archer in the film Kiss and Tell? \
                   <t>Kiss and Tell (1945 film)</t> Kiss and Tell is a 1945 American comedy film starring then 17-year-old Shirley Temple as Corliss Archer.";
        let gold2 = doc(1, "Shirley Temple", "Shirley Temple Black was an American actress and diplomat.");
        let cands = candidate_queries(&a, ctx, &gold2, &OracleOptions::default());
        assert!(cands.iter().any(|c| c.text == "Shirley Temple"), "{cands:?}");
        assert!(candidate_queries(&a, "alpha beta", &gold2, &OracleOptions::default()).is_empty());
    }

    #[test]
    fn empty_title_uses_paragraph_only() {
        let a = Analyzer::default();
        let gold = Document::new(0, "", vec!["Ernest Cline wrote novels".into()]);
        let cands = candidate_queries(&a, "novels by Ernest Cline", &gold, &OracleOptions::default());
        assert!(!cands.is_empty());
        assert!(cands.iter().all(|c| c.source_combo.target == TargetVariant::Paragraph));
    }

    fn oracle_index() -> Index {
        Index::build(
            vec![
                doc(0, "Armada (novel)", "Armada is a science fiction novel by Ernest Cline."),
                doc(1, "Ernest Cline", "Ernest Cline is an American novelist and screenwriter."),
                doc(2, "Spanish Armada", "The Spanish Armada was a fleet that sailed in 1588."),
                doc(3, "Ready Player One", "Ready Player One is a novel by Ernest Cline."),
            ],
            Analyzer::default(),
        )
        .unwrap()
    }

    fn cand(text: &str, start: usize) -> SpanCandidate {
        SpanCandidate {
            text: text.into(),
            char_start: start,
            char_end: start + text.chars().count(),
            heuristic: Heuristic::LcSubstr,
            source_combo: SourceCombo {
                context: ContextVariant::Cleaned,
                target: TargetVariant::Title,
            },
            overlap: 1,
            span_tokens: 1,
        }
    }

    #[test]
    fn select_unique_best_rank() {
        let idx = oracle_index();
        let p = RankingParams::default();
        let cands = [cand("Spanish fleet", 0), cand("Ernest Cline", 20)];
        let o = select_oracle("q", 2, &cands, 1, &idx, &p).unwrap();
        assert_eq!(o.span.text, "Ernest Cline");
        assert_eq!(o.gold_rank, Some(1));
        assert!(!o.flagged);
    }

    #[test]
    fn select_prefers_shorter_on_score_tie() {
        // "zzqx" matches nothing, so both queries score the gold doc identically.
        let idx = oracle_index();
        let p = RankingParams::default();
        let cands = [cand("zzqx Ernest Cline", 0), cand("Ernest Cline", 30)];
        let o = select_oracle("q", 1, &cands, 1, &idx, &p).unwrap();
        assert_eq!(o.span.text, "Ernest Cline");
        assert!(o.gold_rank.unwrap() <= 5);
    }

    #[test]
    fn select_flags_when_gold_never_retrieved() {
        let idx = oracle_index();
        let p = RankingParams::default();
        let cands = [cand("Spanish fleet 1588", 0), cand("fleet", 40)];
        let o = select_oracle("q", 1, &cands, 3, &idx, &p).unwrap();
        assert!(o.flagged);
        assert_eq!(o.gold_rank, None);
        assert_eq!(o.span.text, "fleet");
        assert!(matches!(
            select_oracle("q7", 2, &[], 0, &idx, &p),
            Err(Error::NoOracle { hop: 2, .. })
        ));
    }

    #[test]
    fn derive_is_stable() {
        let idx = oracle_index();
        let q = "Which novel by the author of Armada will be adapted as a film by Steven Spielberg?";
        let gold = idx.document(0).unwrap();
        let p = RankingParams::default();
        let o = OracleOptions::default();
        let a = derive_oracle(&idx, "q", 1, q, &gold, &p, &o).unwrap();
        let b = derive_oracle(&idx, "q", 1, q, &gold, &p, &o).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gold_rank, Some(1));
    }

    proptest! {
        #[test]
        fn spans_are_verbatim(
            ctx in "[A-Za-zé ,.?<>/t]{0,80}",
            title in "[A-Za-z ]{0,20}",
            body in "[A-Za-z ,.]{0,60}",
        ) {
            let a = Analyzer::default();
            let gold = Document::new(0, title, vec![body]);
            for c in candidate_queries(&a, &ctx, &gold, &OracleOptions::default()) {
                prop_assert_eq!(char_slice(&ctx, c.char_start, c.char_end), c.text.as_str());
                prop_assert!(!a.clean_for_overlap(&c.text).is_empty());
            }
        }

        #[test]
        fn strict_overlap_merge_tokens_all_in_target(
            ctx in proptest::collection::vec(0u8..8, 0..15),
            tgt in proptest::collection::vec(0u8..8, 0..15),
        ) {
            let c: Vec<String> = ctx.iter().map(|x| format!("t{x}")).collect();
            let t: Vec<String> = tgt.iter().map(|x| format!("t{x}")).collect();
            let cr: Vec<&str> = c.iter().map(String::as_str).collect();
            let tr: Vec<&str> = t.iter().map(String::as_str).collect();
            if let Some(m) = overlap_merge_match(&cr, &tr, 1.0) {
                for tok in &cr[m.first..=m.last] {
                    prop_assert!(tr.contains(tok));
                }
            }
        }
    }
}
