//! Recall@k curves for single-hop and oracle queries on a synthetic question
//! set, with the d_1/d_2 assignment, both-gold coverage and a CSV for plotting.
//!
//! ```sh
//! cargo run --release --example recall_eval
//! ```

use std::collections::HashMap;

use multihop::eval::{
    both_gold_pct, curves_csv, oracle_outcome, oracle_vs_singlehop_delta, recall_curves, single_hop_outcome,
    EvalQuestion, DEFAULT_KS,
};
use multihop::index::Index;
use multihop::oracle::OracleOptions;
use multihop::pipeline::{order_golds, PipelineConfig};
use multihop::synth::{generate, SynthOptions};
use multihop::textproc::Analyzer;

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let synth = generate(&SynthOptions {
        entities: 3_000,
        questions: 300,
        ..Default::default()
    });
    let index = Index::build(synth.documents.clone(), Analyzer::default())?;
    let config = PipelineConfig::default();
    let opts = OracleOptions::default();
    let depth = *DEFAULT_KS.last().expect("non-empty");

    let questions: Vec<EvalQuestion> = synth
        .questions
        .iter()
        .map(|q| EvalQuestion {
            question: q.question.clone(),
            gold: q.gold_pair(),
        })
        .collect();
    let pairs: Vec<_> = questions.iter().map(|q| q.gold.clone()).collect();

    let mut single = Vec::new();
    let mut single_ctx = HashMap::new();
    let mut oracle = Vec::new();
    for (q, dq) in questions.iter().zip(&synth.questions) {
        let s = single_hop_outcome(&index, q, depth, config.budget(), &config.ranking);
        single_ctx.insert(dq.question_id.clone(), s.final_titles);
        single.push(s.results);

        let golds: Vec<u32> = dq.gold_titles.iter().filter_map(|t| index.find_by_title(t)).collect();
        let ordered = order_golds(&index, &dq.question_id, &dq.question, &golds, &config.ranking, &opts)?;
        let (o, _) = oracle_outcome(&index, q, &ordered, &config, &opts, depth)?;
        oracle.push(o.results);
    }
    let single = recall_curves(&single, &pairs, &DEFAULT_KS);
    let oracle = recall_curves(&oracle, &pairs, &DEFAULT_KS);

    println!("k\tsingle d1\tsingle d2\toracle d1\toracle d2");
    for (i, k) in DEFAULT_KS.iter().enumerate() {
        println!(
            "{k}\t{:.2}\t\t{:.2}\t\t{:.2}\t\t{:.2}",
            single.d1[i], single.d2[i], oracle.d1[i], oracle.d2[i]
        );
    }
    println!("single-hop both-gold in top {}: {:.2}%", config.budget(), both_gold_pct(&single_ctx, &pairs));
    let (d1, d2) = oracle_vs_singlehop_delta(&oracle, &single, 5, 10)?;
    println!("oracle R@5 minus single-hop R@10: d1 {d1:+.2}, d2 {d2:+.2}");
    eprint!("{}", curves_csv(&[("single_hop", &single), ("oracle", &oracle)]));
    Ok(())
}
