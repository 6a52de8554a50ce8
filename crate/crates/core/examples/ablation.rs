//! Single-hop R@10 with and without title boosting and title-match reranking.
//!
//! ```sh
//! cargo run --release --example ablation
//! ```

use multihop::eval::{ablation_tsv, run_ablation, EvalQuestion};
use multihop::index::Index;
use multihop::ranking::RankingParams;
use multihop::synth::{generate, SynthOptions};
use multihop::textproc::Analyzer;

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let synth = generate(&SynthOptions {
        entities: 3_000,
        questions: 400,
        comparison_pct: 50,
        seed: 3,
    });
    let index = Index::build(synth.documents.clone(), Analyzer::default())?;
    let questions: Vec<EvalQuestion> = synth
        .questions
        .iter()
        .map(|q| EvalQuestion {
            question: q.question.clone(),
            gold: q.gold_pair(),
        })
        .collect();
    let rows = run_ablation(&index, &questions, &RankingParams::default(), 10);
    print!("{}", ablation_tsv(&rows, 10));
    Ok(())
}
