//! Cross-lingual hypernymy detection with bilingual sparse non-negative
//! embeddings learned from dependency-parsed corpora.

pub mod contexts;
pub mod cooc;
pub mod corpus;
pub mod scoring;
pub mod solver;
pub mod sparse;
pub mod svd;
pub mod eval;
pub mod pipeline;
pub mod synth;
