//! BM25 scoring, best-field multi-field search and title-match reranking.
//!
//! `retrieve` is the retrieval primitive used by every other module: search
//! the four fields, keep the best field per document (title fields boosted),
//! take the top `rerank_pool` hits, multiply each score by a title-match
//! tier and re-sort.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index::{analyze_fields, Document, FieldId, Index};
use crate::textproc::asciifold;

/// How a document title relates to the query text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchClass {
    Exact,
    TitleInQuery,
    QueryInTitle,
    None,
}

/// Score multipliers per [`MatchClass`], from best to worst match.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TierTable {
    pub exact: f64,
    pub title_in_query: f64,
    pub query_in_title: f64,
    pub none: f64,
}

impl Default for TierTable {
    fn default() -> Self {
        Self {
            exact: 1.5,
            title_in_query: 1.25,
            query_in_title: 1.10,
            none: 1.0,
        }
    }
}

impl TierTable {
    /// Every class maps to 1.0, which turns reranking off.
    pub fn flat() -> Self {
        Self {
            exact: 1.0,
            title_in_query: 1.0,
            query_in_title: 1.0,
            none: 1.0,
        }
    }

    pub fn multiplier(&self, class: MatchClass) -> f64 {
        match class {
            MatchClass::Exact => self.exact,
            MatchClass::TitleInQuery => self.title_in_query,
            MatchClass::QueryInTitle => self.query_in_title,
            MatchClass::None => self.none,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let tiers = [self.exact, self.title_in_query, self.query_in_title, self.none];
        if tiers.iter().any(|t| !(1.0..=1.5).contains(t)) {
            return Err(Error::InvalidParams(
                "rerank multipliers must lie in [1.0, 1.5]".into(),
            ));
        }
        if tiers.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidParams(
                "rerank multipliers must be non-increasing from exact to none".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingParams {
    pub k1: f64,
    pub b: f64,
    pub title_field_boost: f64,
    pub rerank_pool: usize,
    pub tiers: TierTable,
}

impl Default for RankingParams {
    fn default() -> Self {
        Self {
            k1: 1.2,
            b: 0.75,
            title_field_boost: 1.25,
            rerank_pool: 50,
            tiers: TierTable::default(),
        }
    }
}

impl RankingParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0) {
            return Err(Error::InvalidParams("k1 must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParams("b must lie in [0, 1]".into()));
        }
        if !(self.title_field_boost >= 1.0) {
            return Err(Error::InvalidParams("title_field_boost must be >= 1".into()));
        }
        if self.rerank_pool == 0 {
            return Err(Error::InvalidParams("rerank_pool must be >= 1".into()));
        }
        self.tiers.validate()
    }

    pub fn without_title_boost(mut self) -> Self {
        self.title_field_boost = 1.0;
        self
    }

    pub fn without_rerank(mut self) -> Self {
        self.tiers = TierTable::flat();
        self
    }

    pub fn field_boost(&self, field: FieldId) -> f64 {
        if field.is_title() {
            self.title_field_boost
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub doc_id: u32,
    pub title: String,
    /// Best-field BM25 times that field's boost.
    pub raw_score: f64,
    /// `raw_score * rerank_tier`.
    pub boosted_score: f64,
    pub best_field: FieldId,
    pub rerank_tier: f64,
    pub match_class: MatchClass,
}

/// Okapi BM25 weight of one term in one document field.
///
/// `idf = ln(1 + (N - n + 0.5) / (n + 0.5))`, so the weight is positive
/// whenever `tf > 0`.
pub fn bm25_weight(
    tf: u32,
    doc_len: u32,
    avgdl: f64,
    doc_count: u32,
    doc_freq: u32,
    k1: f64,
    b: f64,
) -> f64 {
    if tf == 0 {
        return 0.0;
    }
    let n = f64::from(doc_count);
    let df = f64::from(doc_freq);
    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
    let tf = f64::from(tf);
    let norm = 1.0 - b + b * f64::from(doc_len) / avgdl;
    idf * tf * (k1 + 1.0) / (tf + k1 * norm)
}

/// BM25 of `term` for `doc_id` in `field` under the index's statistics.
pub fn bm25(index: &Index, field: FieldId, term: &str, doc_id: u32, params: &RankingParams) -> f64 {
    let tf = index.term_frequency(field, term, doc_id);
    if tf == 0 {
        return 0.0;
    }
    let stats = index.stats();
    bm25_weight(
        tf,
        index.field_length(field, doc_id),
        stats.fields[field.index()].avgdl,
        stats.doc_count,
        index.doc_freq(field, term),
        params.k1,
        params.b,
    )
}

fn by_score_then_id(a_score: f64, a_id: u32, b_score: f64, b_id: u32) -> Ordering {
    b_score
        .partial_cmp(&a_score)
        .unwrap_or(Ordering::Equal)
        .then(a_id.cmp(&b_id))
}

/// Best-field search without reranking.
///
/// Each field's score is the sum of BM25 weights over the query's analyzed
/// terms for that field (repeated query terms count repeatedly). A document's
/// raw score is the maximum over fields of field score times field boost.
/// Hits are sorted by descending raw score, ties by ascending doc_id.
pub fn search(index: &Index, query: &str, limit: usize, params: &RankingParams) -> Vec<SearchHit> {
    if limit == 0 {
        return Vec::new();
    }
    let terms = analyze_fields(index.analyzer(), query, query);
    let stats = index.stats();
    let mut best: HashMap<u32, (f64, FieldId)> = HashMap::new();

    for field in FieldId::ALL {
        let field_terms = &terms[field.index()];
        if field_terms.is_empty() {
            continue;
        }
        let avgdl = stats.fields[field.index()].avgdl;
        let mut scores: HashMap<u32, f64> = HashMap::new();
        for term in field_terms {
            let Some((df, postings)) = index.postings(field, term) else {
                continue;
            };
            for (doc, tf) in postings {
                let w = bm25_weight(
                    tf,
                    index.field_length(field, doc),
                    avgdl,
                    stats.doc_count,
                    df,
                    params.k1,
                    params.b,
                );
                *scores.entry(doc).or_insert(0.0) += w;
            }
        }
        let boost = params.field_boost(field);
        for (doc, s) in scores {
            let s = s * boost;
            match best.get_mut(&doc) {
                Some(cur) if s > cur.0 || (s == cur.0 && field < cur.1) => *cur = (s, field),
                Some(_) => {}
                None => {
                    best.insert(doc, (s, field));
                }
            }
        }
    }

    let mut ranked: Vec<(u32, f64, FieldId)> = best
        .into_iter()
        .filter(|(_, (s, _))| *s > 0.0)
        .map(|(d, (s, f))| (d, s, f))
        .collect();
    let cmp = |a: &(u32, f64, FieldId), b: &(u32, f64, FieldId)| by_score_then_id(a.1, a.0, b.1, b.0);
    if ranked.len() > limit {
        ranked.select_nth_unstable_by(limit - 1, cmp);
        ranked.truncate(limit);
    }
    ranked.sort_unstable_by(cmp);

    ranked
        .into_iter()
        .map(|(doc_id, raw, field)| SearchHit {
            doc_id,
            title: index.title(doc_id).unwrap_or_default(),
            raw_score: raw,
            boosted_score: raw,
            best_field: field,
            rerank_tier: 1.0,
            match_class: MatchClass::None,
        })
        .collect()
}

fn normalize_for_match(s: &str) -> String {
    asciifold(s)
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// True when `needle` occurs in `haystack` with non-alphanumeric (or no)
/// characters on both sides.
fn contains_on_word_boundary(haystack: &str, needle: &str) -> bool {
    if needle.is_empty() {
        return false;
    }
    haystack.match_indices(needle).any(|(pos, _)| {
        let before = haystack[..pos].chars().next_back();
        let after = haystack[pos + needle.len()..].chars().next();
        !before.is_some_and(char::is_alphanumeric) && !after.is_some_and(char::is_alphanumeric)
    })
}

/// Classifies a title against a query on folded, lowercased,
/// whitespace-normalized forms. Substring classes require the match to be
/// aligned to word boundaries.
pub fn match_class(title: &str, query: &str) -> MatchClass {
    let t = normalize_for_match(title);
    let q = normalize_for_match(query);
    if t.is_empty() || q.is_empty() {
        MatchClass::None
    } else if t == q {
        MatchClass::Exact
    } else if contains_on_word_boundary(&q, &t) {
        MatchClass::TitleInQuery
    } else if contains_on_word_boundary(&t, &q) {
        MatchClass::QueryInTitle
    } else {
        MatchClass::None
    }
}

/// Multiplier for `title` against `query` under the default tier table.
pub fn title_match_tier(title: &str, query: &str) -> f64 {
    TierTable::default().multiplier(match_class(title, query))
}

/// Applies title-match multipliers and re-sorts by boosted score (ties by doc_id).
pub fn rerank(query: &str, mut hits: Vec<SearchHit>, tiers: &TierTable) -> Vec<SearchHit> {
    for h in &mut hits {
        h.match_class = match_class(&h.title, query);
        h.rerank_tier = tiers.multiplier(h.match_class);
        h.boosted_score = h.raw_score * h.rerank_tier;
    }
    hits.sort_by(|a, b| by_score_then_id(a.boosted_score, a.doc_id, b.boosted_score, b.doc_id));
    hits
}

/// Reranked pool of `rerank_pool` candidates, cut to the top `n`.
pub fn retrieve_hits(index: &Index, query: &str, n: usize, params: &RankingParams) -> Vec<SearchHit> {
    let pool = search(index, query, params.rerank_pool.max(n), params);
    let mut hits = rerank(query, pool, &params.tiers);
    hits.truncate(n);
    hits
}

/// The top `n` documents for `query` after reranking.
pub fn retrieve(index: &Index, query: &str, n: usize, params: &RankingParams) -> Vec<Document> {
    retrieve_hits(index, query, n, params)
        .into_iter()
        .filter_map(|h| index.document(h.doc_id))
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::textproc::Analyzer;
    use proptest::prelude::*;

    fn doc(id: u32, title: &str, text: &str) -> Document {
        Document::new(id, title, vec![text.to_string()])
    }

    fn build(docs: Vec<Document>) -> Index {
        Index::build(docs, Analyzer::default()).unwrap()
    }

    #[test]
    fn bm25_absent_term_is_zero() {
        let idx = build(vec![doc(0, "A", "alpha beta")]);
        assert_eq!(bm25(&idx, FieldId::Text, "gamma", 0, &RankingParams::default()), 0.0);
    }

    #[test]
    fn bm25_three_doc_fixture() {
        // Text lengths (4, 4, 4); "armada" only in doc 0.
        let idx = build(vec![
            doc(0, "X", "armada red green blue"),
            doc(1, "Y", "one two three four"),
            doc(2, "Z", "five six seven eight"),
        ]);
        let s = bm25(&idx, FieldId::Text, "armada", 0, &RankingParams::default());
        assert!((s - 0.9808292530117263).abs() < 1e-9, "{s}");
    }

    #[test]
    fn bm25_term_in_every_doc() {
        let p = RankingParams::default();
        let w = bm25_weight(1, 4, 4.0, 3, 3, p.k1, p.b);
        assert!((w - 0.13353139262452257).abs() < 1e-12);
        assert!(w > 0.0);
    }

    #[test]
    fn bm25_longer_doc_fixture() {
        let idx = build(vec![
            doc(0, "X", "armada armada one two three four"),
            doc(1, "Y", "one two three four"),
            doc(2, "Z", "five six seven eight"),
        ]);
        let s = bm25(&idx, FieldId::Text, "armada", 0, &RankingParams::default());
        assert!((s - 1.2483281401967425).abs() < 1e-9, "{s}");
    }

    #[test]
    fn title_match_dominates_text_mention() {
        let idx = build(vec![
            doc(0, "Armada", "a science fiction novel"),
            doc(1, "Space opera", "long text about fleets ships and one armada of many vessels in battle"),
        ]);
        let hits = search(&idx, "Armada", 10, &RankingParams::default());
        assert_eq!(hits[0].doc_id, 0);
        assert_eq!(hits[0].best_field, FieldId::Title);
        assert_eq!(hits.len(), 2);
    }

    #[test]
    fn stop_word_query_only_hits_titles() {
        let idx = build(vec![doc(0, "The Hours", "novel"), doc(1, "Hours", "the of")]);
        let hits = search(&idx, "the of", 10, &RankingParams::default());
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].doc_id, 0);
        assert!(hits[0].best_field.is_title());
        assert!(search(&idx, "", 10, &RankingParams::default()).is_empty());
    }

    #[test]
    fn tiers() {
        assert_eq!(title_match_tier("George W. Bush", "George W. Bush"), 1.5);
        assert_eq!(title_match_tier("Armada", "Armada novel by Ernest Cline"), 1.25);
        assert_eq!(title_match_tier("Bibliography of George W. Bush", "George W. Bush"), 1.10);
        assert_eq!(title_match_tier("Armadillo", "Armada"), 1.0);
        assert_eq!(title_match_tier("Arm", "Armada"), 1.0);
        assert_eq!(title_match_tier("Beyoncé", "beyonce"), 1.5);
        assert_eq!(title_match_tier("A  B", "a b"), 1.5);
    }

    pub(crate) fn bush_corpus() -> Vec<Document> {
        vec![
            doc(0, "George W. Bush Childhood Home", "George W. Bush Childhood Home: George W. Bush lived here; George W. Bush grew up in this George W. Bush house."),
            doc(1, "Bibliography of George W. Bush", "This is a list of books about George W. Bush, the 43rd president."),
            doc(2, "George W. Bush", "George Walker Bush is an American politician who served as the 43rd president."),
            doc(3, "Midland, Texas", "Midland is a city in West Texas."),
            doc(4, "Barack Obama", "Barack Obama is an American politician who served as the 44th president."),
            doc(5, "Laura Bush", "Laura Bush is the wife of George W. Bush."),
            doc(6, "Texas", "Texas is a state in the South Central region of the United States."),
        ]
    }

    #[test]
    fn bush_fixture_reranks_exact_title_first() {
        let idx = build(bush_corpus());
        let p = RankingParams::default();
        let raw = search(&idx, "George W. Bush", 50, &p);
        assert_eq!(raw[1].doc_id, 2, "exact page starts second");
        let hits = retrieve_hits(&idx, "George W. Bush", 10, &p);
        assert_eq!(hits[0].doc_id, 2);
        assert_eq!(hits[0].rerank_tier, 1.5);
    }

    #[test]
    fn rerank_identity_and_single() {
        let idx = build(vec![doc(0, "x", "alpha"), doc(1, "y", "alpha alpha"), doc(2, "z", "beta")]);
        let hits = search(&idx, "alpha", 10, &RankingParams::default());
        let same = rerank("alpha", hits.clone(), &TierTable::flat());
        let ids = |h: &[SearchHit]| h.iter().map(|h| h.doc_id).collect::<Vec<_>>();
        assert_eq!(ids(&same), ids(&hits));
        let one = rerank("alpha", hits[..1].to_vec(), &TierTable::default());
        assert_eq!(ids(&one), ids(&hits[..1]));
    }

    #[test]
    fn retrieve_is_capped_by_scoring_docs() {
        let idx = build(vec![doc(0, "only", "alpha"), doc(1, "other", "beta")]);
        let p = RankingParams::default();
        let docs = retrieve(&idx, "alpha", 5, &p);
        assert_eq!(docs.len(), 1);
        assert_eq!(retrieve(&idx, "alpha", 5, &p), docs);
    }

    #[test]
    fn params_validation() {
        assert!(RankingParams::default().validate().is_ok());
        let mut p = RankingParams::default();
        p.tiers.exact = 1.6;
        assert!(p.validate().is_err());
        let mut p = RankingParams::default();
        p.tiers.none = 1.2;
        assert!(p.validate().is_err());
        let p = RankingParams {
            b: 1.5,
            ..Default::default()
        };
        assert!(p.validate().is_err());
        assert!(RankingParams::default().without_rerank().without_title_boost().validate().is_ok());
    }

    proptest! {
        #[test]
        fn weight_strictly_increasing_in_tf(tf in 1u32..50, dl in 1u32..200, avg in 1.0f64..100.0, n in 2u32..100) {
            let p = RankingParams::default();
            let df = n / 2;
            let a = bm25_weight(tf, dl, avg, n, df, p.k1, p.b);
            let b = bm25_weight(tf + 1, dl, avg, n, df, p.k1, p.b);
            prop_assert!(b > a);
        }

        /// Replacing a non-query token by a query term keeps every field
        /// length fixed and adds one occurrence.
        #[test]
        fn adding_occurrence_never_lowers_raw_score(
            words in proptest::collection::vec(0u8..8, 1..10),
            query in proptest::collection::vec(0u8..4, 1..4),
            pick in 0usize..4,
            slot in 0usize..10,
        ) {
            let mut text: Vec<String> = words
                .iter()
                .map(|&w| if w < 4 { format!("w{w}") } else { format!("filler{w}") })
                .collect();
            text.push("filler9".into());
            let q: Vec<String> = query.iter().map(|w| format!("w{w}")).collect();
            let fillers: Vec<usize> = (0..text.len()).filter(|&i| text[i].starts_with("filler")).collect();
            let target = fillers[slot % fillers.len()];
            let others = [doc(1, "b", "w0 w1 filler5"), doc(2, "c", "w2 w3 filler4 w3")];
            let score = |body: &[String]| {
                let mut docs = vec![doc(0, "a", &body.join(" "))];
                docs.extend(others.iter().cloned());
                let idx = build(docs);
                search(&idx, &q.join(" "), 10, &RankingParams::default())
                    .into_iter()
                    .find(|h| h.doc_id == 0)
                    .map_or(0.0, |h| h.raw_score)
            };
            let before = score(&text);
            text[target] = q[pick % q.len()].clone();
            let after = score(&text);
            prop_assert!(after >= before - 1e-12, "{} -> {}", before, after);
        }

        #[test]
        fn rerank_is_a_permutation(seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let titles = ["alpha", "alpha beta", "beta", "gamma alpha", "delta"];
            let hits: Vec<SearchHit> = (0..rng.gen_range(0..8u32)).map(|i| SearchHit {
                doc_id: i,
                title: titles[rng.gen_range(0..titles.len())].to_string(),
                raw_score: rng.gen_range(0.1..10.0),
                boosted_score: 0.0,
                best_field: FieldId::Text,
                rerank_tier: 1.0,
                match_class: MatchClass::None,
            }).collect();
            let out = rerank("alpha beta", hits.clone(), &TierTable::default());
            let mut a: Vec<u32> = hits.iter().map(|h| h.doc_id).collect();
            let mut b: Vec<u32> = out.iter().map(|h| h.doc_id).collect();
            a.sort(); b.sort();
            prop_assert_eq!(a, b);
            for h in &out {
                prop_assert!([1.0, 1.10, 1.25, 1.5].contains(&h.rerank_tier));
                prop_assert_eq!(h.boosted_score, h.raw_score * h.rerank_tier);
            }
        }
    }
}
