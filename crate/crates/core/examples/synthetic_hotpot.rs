//! Writes a synthetic corpus as bzip2 dump shards plus a question file in the
//! dataset layout, then drives the `multihop` CLI over them end to end.
//!
//! ```sh
//! cargo run --release --example synthetic_hotpot -- /tmp/multihop-demo
//! ```

use std::path::PathBuf;

use anyhow::ensure;
use multihop::corpus_io::{cli, load_wiki_dump, write_dataset, write_dump};
use multihop::synth::{generate, SynthOptions};

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let scratch = tempfile::tempdir()?;
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| scratch.path().to_path_buf());
    let synth = generate(&SynthOptions {
        entities: 2_000,
        questions: 100,
        ..Default::default()
    });
    write_dump(&root.join("dump/AA"), &synth.documents[..1_000], 250, true)?;
    write_dump(&root.join("dump/AB"), &synth.documents[1_000..], 250, true)?;
    write_dataset(&root.join("dev.json"), &synth.questions)?;

    let mut dump = load_wiki_dump(&root.join("dump"), None)?;
    let count = dump.by_ref().count();
    println!("dump: {count} documents in {} shards", dump.stats().shards);

    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let steps: Vec<Vec<String>> = vec![
        vec!["build-index".into(), "--dump".into(), p("dump"), "--out".into(), p("index")],
        vec!["search".into(), "--index".into(), p("index"), "--query".into(), synth.documents[7].title.clone(), "--k".into(), "3".into()],
        vec!["run-pipeline".into(), "--index".into(), p("index"), "--dataset".into(), p("dev.json"), "--out".into(), p("pipeline"), "--generators".into(), "oracle,oracle".into()],
        vec!["eval".into(), "--index".into(), p("index"), "--dataset".into(), p("dev.json"), "--out".into(), p("eval"), "--mode".into(), "single-hop".into()],
    ];
    for args in steps {
        println!("$ multihop {}", args.join(" "));
        let code = cli(std::iter::once("multihop".to_string()).chain(args));
        ensure!(code == 0, "exit code {code}");
    }
    println!("outputs under {}", root.display());
    Ok(())
}
