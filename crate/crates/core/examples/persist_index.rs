//! Builds a spilling, multi-segment index from a synthetic corpus, persists
//! it, reopens it and checks that both answer a query identically.
//!
//! ```sh
//! cargo run --release --example persist_index -- /tmp/multihop-index
//! ```

use std::path::PathBuf;

use anyhow::{ensure, Context};
use multihop::index::{Index, IndexWriter, WriterOptions};
use multihop::ranking::{retrieve_hits, RankingParams};
use multihop::synth::{generate, SynthOptions};
use multihop::textproc::Analyzer;

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let scratch = tempfile::tempdir()?;
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| scratch.path().join("index"));

    let synth = generate(&SynthOptions {
        entities: 5_000,
        questions: 0,
        ..Default::default()
    });
    let spill = scratch.path().join("spill");
    std::fs::create_dir_all(&spill)?;
    let mut writer = IndexWriter::new(
        Analyzer::default(),
        WriterOptions {
            segment_docs: 1_000,
            batch_docs: 256,
            spill_dir: Some(spill),
        },
    )?;
    writer.add_all(synth.documents.clone())?;
    let built = writer.finish()?;
    built.persist(&dir).with_context(|| format!("persisting to {}", dir.display()))?;

    let opened = Index::open(&dir)?;
    let manifest = opened.manifest();
    println!("{} documents, format v{}", manifest.doc_count, manifest.format_version);
    for (name, entry) in &manifest.files {
        println!("  {name:<18} {:>9} bytes  crc32={:08x}", entry.bytes, entry.crc32);
    }

    let params = RankingParams::default();
    let query = &synth.documents[42].title;
    let a = retrieve_hits(&built, query, 10, &params);
    let b = retrieve_hits(&opened, query, 10, &params);
    ensure!(a == b, "reopened index ranks differently");
    println!("query {query:?}: top hit {:?}, identical after reopen", b[0].title);
    Ok(())
}
