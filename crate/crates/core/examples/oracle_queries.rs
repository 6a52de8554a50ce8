//! Derives oracle search queries for both hops of a two-document question:
//! every heuristic's candidate spans, then the one that ranks the gold page best.
//!
//! ```sh
//! cargo run --example oracle_queries
//! ```

use multihop::index::{Document, Index};
use multihop::oracle::{candidate_queries, select_oracle, OracleOptions};
use multihop::pipeline::{extend_context, PipelineConfig, RetrievalContext};
use multihop::ranking::RankingParams;
use multihop::textproc::Analyzer;

fn page(id: u32, title: &str, sentences: &[&str]) -> Document {
    Document::new(id, title, sentences.iter().map(|s| s.to_string()).collect())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let index = Index::build(
        vec![
            page(0, "Kiss and Tell (1945 film)", &[
                "Kiss and Tell is a 1945 American comedy film starring then 17-year-old Shirley Temple as Corliss Archer.",
            ]),
            page(1, "Shirley Temple", &[
                "Shirley Temple Black was an American actress, singer, dancer and diplomat.",
                " She served as Chief of Protocol of the United States.",
            ]),
            page(2, "Corliss Archer", &["Corliss Archer is a fictional teenage girl from a radio series."]),
            page(3, "Kiss", &["Kiss is an American rock band formed in New York City."]),
            page(4, "Meet Corliss Archer", &["Meet Corliss Archer is an American television sitcom."]),
        ],
        Analyzer::default(),
    )?;
    let params = RankingParams::default();
    let opts = OracleOptions::default();
    let question = "What government position was held by the woman who portrayed Corliss Archer in the film Kiss and Tell?";

    let mut ctx = RetrievalContext::new("q1", question);
    for (hop, gold_id) in [(1usize, 0u32), (2, 1)] {
        let serialized = ctx.serialize();
        let gold = index.document(gold_id).expect("fixture doc");
        let candidates = candidate_queries(index.analyzer(), &serialized, &gold, &opts);
        println!("hop {hop}: {} candidates toward {:?}", candidates.len(), gold.title);
        for c in &candidates {
            println!(
                "  {:<14} {:?}/{:?}  {:?}",
                format!("{:?}", c.heuristic),
                c.source_combo.context,
                c.source_combo.target,
                c.text
            );
        }
        let oracle = select_oracle("q1", hop, &candidates, gold_id, &index, &params)?;
        println!("  -> oracle {:?} puts the gold page at rank {:?}\n", oracle.span.text, oracle.gold_rank);
        let config = PipelineConfig { n: 2, ..Default::default() };
        extend_context(&index, &mut ctx, oracle.span.text, &config);
    }
    println!("final context:\n{}", ctx.serialize());
    Ok(())
}
