//! Knowledge-base completion with per-relation boosted-tree classifiers over
//! pre-trained distance-based entity embeddings.
//!
//! The pipeline has three stages: build per-relation training data from a
//! triple store (with subrelation-based positive augmentation and
//! prior-driven negative sampling), encode entities with a translational or
//! rotational embedding model, and train one gradient-boosted tree classifier
//! per relation (and per inverse relation). Link prediction ranks candidate
//! tails with the classifier probability, gated by a local-closed-world check
//! on relations whose tails are confined to their observed range.

pub mod embedding;
pub mod error;
pub mod eval;
pub mod gbt;
pub mod kg;
pub mod pipeline;
pub mod relations;
pub mod rng;
pub mod sampling;

pub use error::{Error, Result};
pub use kg::{EntityId, PairSet, PairSetMap, RelationId, Triple, TripleStore};
