//! Gold-document recall.
//!
//! Every question has two gold titles. Given the ranked title lists a
//! configuration produced for a question (one list per query it issued),
//! the gold with the better best rank is `d_1` and the other is `d_2`.
//! Recall@k for `d_i` is the percentage of questions whose `d_i` rank is
//! at most k.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tracing::warn;

use crate::error::{Error, Result};
use crate::index::Index;
use crate::oracle::OracleOptions;
use crate::pipeline::{run, training_context, HopTrace, PipelineConfig, QueryGenerator, TrainingOutput};
use crate::ranking::{retrieve_hits, RankingParams};

pub const DEFAULT_KS: [usize; 6] = [1, 2, 5, 10, 20, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionType {
    Bridge,
    Comparison,
}

impl QuestionType {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bridge" => Some(Self::Bridge),
            "comparison" => Some(Self::Comparison),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Bridge => "bridge",
            Self::Comparison => "comparison",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldPair {
    pub question_id: String,
    pub titles: [String; 2],
    pub question_type: QuestionType,
    pub level: String,
}

/// Ranked title lists produced for one question, one list per query.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QuestionResults {
    pub question_id: String,
    pub lists: Vec<Vec<String>>,
}

/// Best 1-based rank of `title` across `lists`.
pub fn best_rank(lists: &[Vec<String>], title: &str) -> Option<usize> {
    lists
        .iter()
        .filter_map(|l| l.iter().position(|t| t == title).map(|p| p + 1))
        .min()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldOrder {
    pub d1: String,
    pub d1_rank: Option<usize>,
    pub d2: String,
    pub d2_rank: Option<usize>,
}

/// `d_1` is the gold with the better best rank; an absent gold ranks last;
/// equal ranks fall back to title order.
pub fn assign_gold_order(lists: &[Vec<String>], pair: &GoldPair) -> GoldOrder {
    let [a, b] = &pair.titles;
    let (ra, rb) = (best_rank(lists, a), best_rank(lists, b));
    let key = |r: Option<usize>| r.unwrap_or(usize::MAX);
    let a_first = (key(ra), a) <= (key(rb), b);
    if a_first {
        GoldOrder {
            d1: a.clone(),
            d1_rank: ra,
            d2: b.clone(),
            d2_rank: rb,
        }
    } else {
        GoldOrder {
            d1: b.clone(),
            d1_rank: rb,
            d2: a.clone(),
            d2_rank: ra,
        }
    }
}

/// Order-independent hash of a question set.
pub fn question_set_fingerprint<'a>(ids: impl IntoIterator<Item = &'a str>) -> String {
    let mut ids: Vec<&str> = ids.into_iter().collect();
    ids.sort_unstable();
    ids.dedup();
    let mut h = Sha256::new();
    for id in ids {
        h.update(id.as_bytes());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub ks: Vec<usize>,
    /// Percentages aligned with `ks`.
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub question_count: usize,
    pub question_set: String,
}

impl RecallReport {
    pub fn at(&self, k: usize) -> Option<(f64, f64)> {
        let i = self.ks.iter().position(|&x| x == k)?;
        Some((self.d1[i], self.d2[i]))
    }

    /// `k<TAB>d1<TAB>d2` rows under a header.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("k\td1\td2\n");
        for (i, k) in self.ks.iter().enumerate() {
            let _ = writeln!(out, "{k}\t{:.2}\t{:.2}", self.d1[i], self.d2[i]);
        }
        out
    }
}

/// Plot-ready long format: `k,series,value`, series named `<name>_d1`/`<name>_d2`.
pub fn curves_csv(reports: &[(&str, &RecallReport)]) -> String {
    let mut out = String::from("k,series,value\n");
    for (name, r) in reports {
        for (which, vals) in [("d1", &r.d1), ("d2", &r.d2)] {
            for (k, v) in r.ks.iter().zip(vals.iter()) {
                let _ = writeln!(out, "{k},{name}_{which},{v:.4}");
            }
        }
    }
    out
}

fn pct(count: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        100.0 * count as f64 / total as f64
    }
}

/// Recall@k over `pairs`. Questions without results count as misses.
pub fn recall_curves(results: &[QuestionResults], pairs: &[GoldPair], ks: &[usize]) -> RecallReport {
    let by_id: HashMap<&str, &QuestionResults> =
        results.iter().map(|r| (r.question_id.as_str(), r)).collect();
    let empty: Vec<Vec<String>> = Vec::new();
    let orders: Vec<GoldOrder> = pairs
        .par_iter()
        .map(|p| {
            let lists = match by_id.get(p.question_id.as_str()) {
                Some(r) => &r.lists,
                None => {
                    warn!(question_id = %p.question_id, "no results; counted as a miss");
                    &empty
                }
            };
            assign_gold_order(lists, p)
        })
        .collect();
    let hit = |r: Option<usize>, k: usize| r.is_some_and(|r| r <= k);
    let n = pairs.len();
    RecallReport {
        ks: ks.to_vec(),
        d1: ks
            .iter()
            .map(|&k| pct(orders.iter().filter(|o| hit(o.d1_rank, k)).count(), n))
            .collect(),
        d2: ks
            .iter()
            .map(|&k| pct(orders.iter().filter(|o| hit(o.d2_rank, k)).count(), n))
            .collect(),
        question_count: n,
        question_set: question_set_fingerprint(pairs.iter().map(|p| p.question_id.as_str())),
    }
}

/// Per question-type reports.
pub fn recall_by_type(
    results: &[QuestionResults],
    pairs: &[GoldPair],
    ks: &[usize],
) -> BTreeMap<QuestionType, RecallReport> {
    let mut groups: BTreeMap<QuestionType, Vec<GoldPair>> = BTreeMap::new();
    for p in pairs {
        groups.entry(p.question_type).or_default().push(p.clone());
    }
    groups
        .into_iter()
        .map(|(t, ps)| (t, recall_curves(results, &ps, ks)))
        .collect()
}

/// Percentage of questions whose final context holds both gold titles.
/// `contexts` maps question_id to the titles in its final context.
pub fn both_gold_pct(contexts: &HashMap<String, Vec<String>>, pairs: &[GoldPair]) -> f64 {
    let both = pairs
        .iter()
        .filter(|p| {
            contexts.get(&p.question_id).is_some_and(|titles| {
                let set: HashSet<&str> = titles.iter().map(String::as_str).collect();
                p.titles.iter().all(|t| set.contains(t.as_str()))
            })
        })
        .count();
    pct(both, pairs.len())
}

/// Combined-oracle improvement: oracle R@`oracle_k` minus single-hop
/// R@`single_k`, for `d_1` and `d_2`.
pub fn oracle_vs_singlehop_delta(
    oracle: &RecallReport,
    single: &RecallReport,
    oracle_k: usize,
    single_k: usize,
) -> Result<(f64, f64)> {
    if oracle.question_set != single.question_set {
        return Err(Error::QuestionSetMismatch {
            left: oracle.question_count,
            right: single.question_count,
        });
    }
    let (o1, o2) = oracle
        .at(oracle_k)
        .ok_or_else(|| Error::InvalidParams(format!("oracle report lacks k={oracle_k}")))?;
    let (s1, s2) = single
        .at(single_k)
        .ok_or_else(|| Error::InvalidParams(format!("single-hop report lacks k={single_k}")))?;
    Ok((o1 - s1, o2 - s2))
}

/// A question to evaluate: its text and gold pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalQuestion {
    pub question: String,
    pub gold: GoldPair,
}

/// Ranked lists plus the final context titles for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionOutcome {
    pub results: QuestionResults,
    pub final_titles: Vec<String>,
}

fn ranked_titles(index: &Index, query: &str, depth: usize, params: &RankingParams) -> Vec<String> {
    if query.trim().is_empty() {
        return Vec::new();
    }
    retrieve_hits(index, query, depth, params)
        .into_iter()
        .map(|h| h.title)
        .collect()
}

/// Question as the only query; the final context is its top `budget` titles.
pub fn single_hop_outcome(
    index: &Index,
    q: &EvalQuestion,
    depth: usize,
    budget: usize,
    params: &RankingParams,
) -> QuestionOutcome {
    let list = ranked_titles(index, &q.question, depth.max(budget), params);
    QuestionOutcome {
        final_titles: list.iter().take(budget).cloned().collect(),
        results: QuestionResults {
            question_id: q.gold.question_id.clone(),
            lists: vec![list.into_iter().take(depth).collect()],
        },
    }
}

/// Question-as-query results: one ranked list of `depth` titles each.
pub fn single_hop_results(
    index: &Index,
    questions: &[EvalQuestion],
    depth: usize,
    params: &RankingParams,
) -> Vec<QuestionResults> {
    questions
        .par_iter()
        .map(|q| single_hop_outcome(index, q, depth, 0, params).results)
        .collect()
}

/// Runs the pipeline; each hop query contributes its ranked list.
pub fn pipeline_outcome(
    index: &Index,
    q: &EvalQuestion,
    generators: &[&dyn QueryGenerator],
    config: &PipelineConfig,
    depth: usize,
) -> Result<(QuestionOutcome, Vec<HopTrace>)> {
    let (ctx, traces) = run(index, &q.gold.question_id, &q.question, generators, config)?;
    let lists = ctx
        .hops
        .iter()
        .map(|h| ranked_titles(index, &h.query, depth, &config.ranking))
        .collect();
    Ok((
        QuestionOutcome {
            results: QuestionResults {
                question_id: q.gold.question_id.clone(),
                lists,
            },
            final_titles: ctx.titles().into_iter().map(str::to_string).collect(),
        },
        traces,
    ))
}

/// Oracle queries from [`training_context`]; `golds` in `d_1, d_2` order.
/// The final context includes injected golds, so it is not a fair
/// coverage measure; use [`pipeline_outcome`] with oracle generators for that.
pub fn oracle_outcome(
    index: &Index,
    q: &EvalQuestion,
    golds: &[u32],
    config: &PipelineConfig,
    opts: &OracleOptions,
    depth: usize,
) -> Result<(QuestionOutcome, TrainingOutput)> {
    let out = training_context(index, &q.gold.question_id, &q.question, golds, config, opts)?;
    let lists = out
        .records
        .iter()
        .map(|r| ranked_titles(index, &r.oracle.span.text, depth, &config.ranking))
        .collect();
    Ok((
        QuestionOutcome {
            results: QuestionResults {
                question_id: q.gold.question_id.clone(),
                lists,
            },
            final_titles: out.context.titles().into_iter().map(str::to_string).collect(),
        },
        out,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub setup: String,
    pub d1: f64,
    pub d2: f64,
}

/// The four ranking configurations compared by [`run_ablation`].
pub fn ablation_grid(base: &RankingParams) -> Vec<(&'static str, RankingParams)> {
    vec![
        ("final", *base),
        ("w/o title boosting", base.without_title_boost()),
        ("w/o reranking", base.without_rerank()),
        ("w/o both", base.without_title_boost().without_rerank()),
    ]
}

/// Single-hop R@`k` under each configuration of [`ablation_grid`].
pub fn run_ablation(
    index: &Index,
    questions: &[EvalQuestion],
    base: &RankingParams,
    k: usize,
) -> Vec<AblationRow> {
    let pairs: Vec<GoldPair> = questions.iter().map(|q| q.gold.clone()).collect();
    ablation_grid(base)
        .into_iter()
        .map(|(name, params)| {
            let results = single_hop_results(index, questions, k, &params);
            let r = recall_curves(&results, &pairs, &[k]);
            AblationRow {
                setup: name.to_string(),
                d1: r.d1[0],
                d2: r.d2[0],
            }
        })
        .collect()
}

pub fn ablation_tsv(rows: &[AblationRow], k: usize) -> String {
    let mut out = format!("setup\td1_R@{k}\td2_R@{k}\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{:.2}\t{:.2}", r.setup, r.d1, r.d2);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(id: &str, a: &str, b: &str) -> GoldPair {
        GoldPair {
            question_id: id.into(),
            titles: [a.into(), b.into()],
            question_type: QuestionType::Bridge,
            level: "hard".into(),
        }
    }

    fn list(titles: &[&str]) -> Vec<String> {
        titles.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn order_rule() {
        let p = pair("q", "A", "B");
        let l = vec![list(&["x", "A", "y", "z", "w", "v", "B"])];
        let o = assign_gold_order(&l, &p);
        assert_eq!((o.d1.as_str(), o.d1_rank, o.d2.as_str(), o.d2_rank), ("A", Some(2), "B", Some(7)));
        let o = assign_gold_order(&[], &pair("q", "Zed", "Alpha"));
        assert_eq!((o.d1.as_str(), o.d2.as_str()), ("Alpha", "Zed"));
        assert_eq!(o.d1_rank, None);
        // Cross-list tie.
        let o = assign_gold_order(&[list(&["B"]), list(&["A"])], &p);
        assert_eq!(o.d1, "A");
    }

    #[test]
    fn perfect_recall() {
        let pairs = vec![pair("q1", "A", "B"), pair("q2", "C", "D")];
        let results = vec![
            QuestionResults {
                question_id: "q1".into(),
                lists: vec![list(&["A"]), list(&["B"])],
            },
            QuestionResults {
                question_id: "q2".into(),
                lists: vec![list(&["D"]), list(&["C"])],
            },
        ];
        let r = recall_curves(&results, &pairs, &DEFAULT_KS);
        assert!(r.d1.iter().chain(r.d2.iter()).all(|&v| v == 100.0));
        assert!(r.to_tsv().starts_with("k\td1\td2\n1\t100.00\t100.00\n"));
    }

    #[test]
    fn missing_results_are_misses() {
        let pairs = vec![pair("q1", "A", "B"), pair("q2", "C", "D")];
        let results = vec![QuestionResults {
            question_id: "q1".into(),
            lists: vec![list(&["A", "B"])],
        }];
        let r = recall_curves(&results, &pairs, &[1, 2]);
        assert_eq!(r.d1, vec![50.0, 50.0]);
        assert_eq!(r.d2, vec![0.0, 50.0]);
    }

    #[test]
    fn both_gold() {
        let pairs = vec![pair("q1", "A", "B"), pair("q2", "C", "D")];
        let mut ctx = HashMap::new();
        assert_eq!(both_gold_pct(&ctx, &pairs), 0.0);
        ctx.insert("q1".to_string(), list(&["B", "x", "A"]));
        ctx.insert("q2".to_string(), list(&["C"]));
        assert_eq!(both_gold_pct(&ctx, &pairs), 50.0);
    }

    #[test]
    fn deltas() {
        let pairs = vec![pair("q1", "A", "B")];
        let single = recall_curves(
            &[QuestionResults {
                question_id: "q1".into(),
                lists: vec![list(&["A", "x", "y"])],
            }],
            &pairs,
            &[5, 10],
        );
        assert_eq!(oracle_vs_singlehop_delta(&single, &single, 5, 10).unwrap(), (0.0, 0.0));
        let oracle = recall_curves(
            &[QuestionResults {
                question_id: "q1".into(),
                lists: vec![list(&["A"]), list(&["B"])],
            }],
            &pairs,
            &[5, 10],
        );
        let (a, b) = oracle_vs_singlehop_delta(&oracle, &single, 5, 10).unwrap();
        assert_eq!((a, b), (0.0, 100.0));
        let other = recall_curves(&[], &[pair("q9", "A", "B")], &[5, 10]);
        assert!(matches!(
            oracle_vs_singlehop_delta(&oracle, &other, 5, 10),
            Err(Error::QuestionSetMismatch { .. })
        ));
    }

    #[test]
    fn csv_layout() {
        let pairs = vec![pair("q1", "A", "B")];
        let r = recall_curves(&[], &pairs, &[1]);
        assert_eq!(curves_csv(&[("single", &r)]), "k,series,value\n1,single_d1,0.0000\n1,single_d2,0.0000\n");
    }

    proptest! {
        #[test]
        fn curve_invariants(
            ranks in proptest::collection::vec((proptest::option::of(0usize..12), proptest::option::of(0usize..12)), 1..40),
        ) {
            let mut pairs = Vec::new();
            let mut results = Vec::new();
            for (i, (ra, rb)) in ranks.iter().enumerate() {
                let id = format!("q{i}");
                let mut l: Vec<String> = (0..12).map(|j| format!("f{j}")).collect();
                if let Some(r) = ra { l[*r] = "A".into(); }
                if let Some(r) = rb { if Some(*r) != *ra { l[*r] = "B".into(); } }
                pairs.push(pair(&id, "A", "B"));
                results.push(QuestionResults { question_id: id, lists: vec![l] });
            }
            let r = recall_curves(&results, &pairs, &DEFAULT_KS);
            for i in 0..r.ks.len() {
                prop_assert!(r.d1[i] >= r.d2[i]);
                prop_assert!((0.0..=100.0).contains(&r.d1[i]));
                if i > 0 {
                    prop_assert!(r.d1[i] >= r.d1[i - 1] && r.d2[i] >= r.d2[i - 1]);
                }
            }
            prop_assert_eq!(r.d2[0], 0.0);
            prop_assert_eq!(&r, &recall_curves(&results, &pairs, &DEFAULT_KS));
        }
    }
}
