//! Biomedical entity linking as constrained generation.
//!
//! The crate covers the full data path around a generative linker:
//!
//! - [`kb`]: load a concept knowledge base and prune synonyms that are
//!   ambiguous inside a semantic group.
//! - [`tfidf`] and [`representation`]: pick the synonym that best matches a
//!   mention under character 3-gram TF-IDF, used as the generation target.
//! - [`seq`]: render model inputs and targets, and mix human and synthetic
//!   training streams.
//! - [`tokenizer`], [`trie`], [`decode`], [`scorers`]: per-group synonym
//!   tries and trie-constrained greedy/beam decoding over any scorer.
//! - [`synth`]: prompts for LLM-generated training sentences and validation
//!   of the responses.
//! - [`judge`]: LLM-as-a-judge prompts, verdict parsing and statistics.
//! - [`eval`]: recall, seen/unseen stratification, document bootstrap,
//!   confidence thresholds and efficiency probes.
//! - [`service`]: a line-delimited JSON service answering trie queries for
//!   external generation loops.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod decode;
pub mod error;
pub mod eval;
pub mod judge;
pub mod kb;
pub mod normalize;
pub mod representation;
pub mod scorers;
pub mod seq;
pub mod service;
pub mod synth;
pub mod template;
pub mod tfidf;
pub mod tokenizer;
pub mod trie;

pub use error::{Error, Result};
