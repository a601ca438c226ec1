//! Non-neural core for reference-grounded short-article generation.
//!
//! - [`text`]: tokenization, sentence splitting, stopwords, reference marks.
//! - [`corpus`]: cleaning, term-recall scoring, passage windows, mark
//!   assignment and dataset row construction.
//! - [`sparse`]: max-pooled sparse lexical vectors, ranking loss with
//!   asymmetric sparsity penalties, and a toy linear encoder with gradients.
//! - [`index`]: exact inverted-index search (sparse dot product and BM25).
//! - [`topic`]: topic distance and the consistency/diversity filter.
//! - [`citation`]: refer score and reference-mark relabeling.
//! - [`eval`]: retrieval and n-gram generation metrics.
//! - [`gradcheck`]: finite-difference verification of the toy encoder.

pub mod citation;
pub mod corpus;
pub mod eval;
pub mod gradcheck;
pub mod index;
pub mod sparse;
pub mod text;
pub mod topic;

pub use text::{tokenize, MarkedSentence, StopwordSet, TokenSeq};
