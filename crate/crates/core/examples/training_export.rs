//! Builds training contexts with gold injection and writes the per-hop
//! supervision records (serialized context plus oracle span) as JSON lines.
//!
//! ```sh
//! cargo run --release --example training_export -- /tmp/training.jsonl
//! ```

use std::io::Write;

use anyhow::Context;
use multihop::index::Index;
use multihop::oracle::OracleOptions;
use multihop::pipeline::{order_golds, training_context, PipelineConfig};
use multihop::synth::{generate, SynthOptions};
use multihop::textproc::{char_slice, Analyzer};

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let synth = generate(&SynthOptions {
        entities: 1_000,
        questions: 50,
        ..Default::default()
    });
    let index = Index::build(synth.documents.clone(), Analyzer::default())?;
    let config = PipelineConfig::default();
    let opts = OracleOptions::default();

    let mut out: Box<dyn Write> = match std::env::args().nth(1) {
        Some(p) => Box::new(std::fs::File::create(&p).with_context(|| p.clone())?),
        None => Box::new(std::io::stdout().lock()),
    };
    let (mut records, mut injected) = (0, 0);
    for q in &synth.questions {
        let golds: Vec<u32> = q.gold_titles.iter().filter_map(|t| index.find_by_title(t)).collect();
        let ordered = order_golds(&index, &q.question_id, &q.question, &golds, &config.ranking, &opts)?;
        let training = training_context(&index, &q.question_id, &q.question, &ordered, &config, &opts)?;
        for r in &training.records {
            let s = &r.oracle.span;
            assert_eq!(char_slice(&r.context, s.char_start, s.char_end), s.text);
            serde_json::to_writer(&mut out, r)?;
            writeln!(out)?;
            records += 1;
        }
        injected += training.context.hops.iter().filter(|h| h.injected_gold.is_some()).count();
    }
    eprintln!("{records} supervision records, {injected} hops needed gold injection");
    Ok(())
}
