//! Shows how the two analyzers and the bigram shingler see a piece of text.
//!
//! ```sh
//! cargo run --example analyze_text -- "Ærøskøbing is a town in the Danish archipelago"
//! ```

use multihop::textproc::{shingle2, Analyzer};

fn main() -> anyhow::Result<()> {
    let text = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "The Æon Flux of Zürich, in 1999!".to_string());
    let analyzer = Analyzer::default();

    println!("input:    {text}");
    println!("folded:   {}", analyzer.normalize(&text));

    let simple: Vec<_> = analyzer.simple(&text).into_iter().map(|t| t.text).collect();
    println!("simple:   {simple:?}");

    let standard = analyzer.standard(&text);
    for t in &standard {
        println!("  {:>3}..{:<3} {}", t.char_start, t.char_end, t.text);
    }
    println!("bigrams:  {:?}", shingle2(&standard));
    println!("stop list has {} words", analyzer.stops().len());
    Ok(())
}
