//! Multi-hop document retrieval over a Wikipedia-style corpus.
//!
//! The crate is organized bottom-up:
//!
//! - [`textproc`] for analyzers (folding, lowercasing, stop words, bigrams)
//! - [`index`], a four-field inverted index with persistence
//! - [`ranking`] for BM25 best-field search, title boosting and title-match reranking
//! - [`oracle`], overlap heuristics that derive search queries from gold documents
//! - [`pipeline`], the hop-by-hop retrieve-and-extend loop and training contexts
//! - [`eval`] for recall@k curves, both-gold coverage and ablation tables
//! - [`corpus_io`] for dump/dataset ingestion, run configuration and the CLI
//! - [`synth`], seeded synthetic corpora and question sets for demos and tests
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod corpus_io;
pub mod error;
pub mod eval;
pub mod index;
pub mod oracle;
pub mod pipeline;
pub mod ranking;
pub mod synth;
pub mod textproc;

pub use error::{Error, Result};
