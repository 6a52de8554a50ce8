//! Builds an in-memory index over a handful of pages and runs a ranked search,
//! showing raw best-field scores next to the title-match reranked scores.
//!
//! ```sh
//! cargo run --example build_and_search -- "George W. Bush"
//! ```

use multihop::index::{Document, Index};
use multihop::ranking::{retrieve_hits, search, RankingParams};
use multihop::textproc::Analyzer;

fn page(id: u32, title: &str, text: &str) -> Document {
    Document::new(id, title, vec![text.to_string()])
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let query = std::env::args().nth(1).unwrap_or_else(|| "George W. Bush".into());

    let corpus = vec![
        page(0, "George W. Bush Childhood Home", "George W. Bush lived here; George W. Bush grew up in this George W. Bush house."),
        page(1, "Laura Bush", "Laura Bush is the wife of George W. Bush and a former librarian."),
        page(2, "George W. Bush", "George Walker Bush is an American politician who served as the 43rd president."),
        page(3, "Bibliography of George W. Bush", "A list of books about George W. Bush and his presidency."),
        page(4, "George H. W. Bush", "George Herbert Walker Bush was the 41st president."),
        page(5, "Bush (band)", "Bush is a British rock band formed in London."),
    ];
    let index = Index::build(corpus, Analyzer::default())?;
    let params = RankingParams::default();

    println!("-- BM25 best-field ranking --");
    for (i, h) in search(&index, &query, 5, &params).iter().enumerate() {
        println!("{:>2}  {:<32} raw={:.4} field={}", i + 1, h.title, h.raw_score, h.best_field.name());
    }

    println!("-- after title-match rerank --");
    for (i, h) in retrieve_hits(&index, &query, 5, &params).iter().enumerate() {
        println!(
            "{:>2}  {:<32} boosted={:.4} tier={:.2} ({:?})",
            i + 1,
            h.title,
            h.boosted_score,
            h.rerank_tier,
            h.match_class
        );
    }
    Ok(())
}
