//! Proposition-level multi-document summarization.
//!
//! The pipeline extracts sub-sentential propositions from a set of related
//! documents, filters them with a salience scorer, groups paraphrases by
//! agglomerative clustering over pairwise similarities, ranks the clusters,
//! and emits a bullet-style summary — either abstractive (one generated
//! sentence per cluster) or extractive (one representative proposition per
//! cluster). Label derivation, greedy oracles, a self-contained ROUGE
//! evaluator, and per-bullet evidence reports round out the toolkit.
//!
//! Model-backed components (extraction, salience, similarity, generation)
//! sit behind backend traits; deterministic lexical reference backends ship
//! in-tree so the whole pipeline runs without any model.

pub mod clustering;
pub mod corpus;
pub mod fusion;
pub mod pipeline;
pub mod propositions;
pub mod ranking;
pub mod rouge;
pub mod salience;
pub mod similarity;
