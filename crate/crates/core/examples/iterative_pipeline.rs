//! Runs the two-hop retrieve-and-extend loop on synthetic bridge questions,
//! once with the question as every query and once with oracle queries, and
//! prints the per-hop trace for one question.
//!
//! ```sh
//! cargo run --release --example iterative_pipeline
//! ```

use std::collections::HashMap;

use multihop::index::Index;
use multihop::oracle::OracleOptions;
use multihop::pipeline::{export_qa_input, run, OracleGenerator, PipelineConfig, QuestionGenerator};
use multihop::synth::{generate, SynthOptions};
use multihop::textproc::Analyzer;

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let synth = generate(&SynthOptions {
        entities: 3_000,
        questions: 200,
        comparison_pct: 0,
        seed: 11,
    });
    let index = Index::build(synth.documents.clone(), Analyzer::default())?;
    let config = PipelineConfig::default();

    let golds: HashMap<String, Vec<u32>> = synth
        .questions
        .iter()
        .map(|q| {
            let ids = q.gold_titles.iter().filter_map(|t| index.find_by_title(t)).collect();
            (q.question_id.clone(), ids)
        })
        .collect();
    let oracle = OracleGenerator::new(&index, golds, config.ranking, OracleOptions::default());

    let mut covered = [0usize; 2];
    for q in &synth.questions {
        let setups: [[&dyn multihop::pipeline::QueryGenerator; 2]; 2] =
            [[&QuestionGenerator, &QuestionGenerator], [&oracle, &oracle]];
        for (i, gens) in setups.iter().enumerate() {
            let (ctx, _) = run(&index, &q.question_id, &q.question, gens, &config)?;
            let titles = ctx.titles();
            if q.gold_titles.iter().all(|g| titles.contains(&g.as_str())) {
                covered[i] += 1;
            }
        }
    }
    let n = synth.questions.len() as f64;
    println!("both gold pages in the 10-paragraph context:");
    println!("  question as query: {:.1}%", 100.0 * covered[0] as f64 / n);
    println!("  oracle queries:    {:.1}%", 100.0 * covered[1] as f64 / n);

    let q = &synth.questions[0];
    let (ctx, trace) = run(&index, &q.question_id, &q.question, &[&oracle, &oracle], &config)?;
    println!("\n{}\ngold: {:?}", q.question, q.gold_titles);
    for t in &trace {
        println!("hop {} query {:?}", t.hop, t.query);
        for e in t.pool.iter().take(6) {
            let mark = if e.kept { "keep" } else { "    " };
            println!("  {mark} {:>2} {:<24} {:.3} x{:.2}", e.rank, e.title, e.raw_score, e.tier);
        }
    }
    let record = export_qa_input(&ctx);
    println!("reader record: {} paragraphs", record.context.len());
    Ok(())
}
