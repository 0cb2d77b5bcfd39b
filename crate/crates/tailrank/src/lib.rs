//! Context retrieval for long-tail entities.
//!
//! Given an entity with little or no knowledge-base presence — a short
//! description, a coarse type and its known surface forms — this crate
//! ranks the sentences that mention one of those surface forms by how
//! likely the mention actually refers to the entity. Instead of relying
//! on the entity's own (missing) profile, the ranking leans on support
//! information: well-described catalog entities similar to the query, and
//! the sentences an entity-linking pass has confidently linked to them.
//!
//! The crate also ships the two comparison systems (plain BM25 sentence
//! retrieval and a link-confidence baseline), top-k pooling for building
//! assessment sets, and MAP/MRR evaluation with paired significance
//! testing — everything needed to run the full experiment loop via the
//! `tailrank` binary.

pub mod baselines;
pub mod cli;
pub mod data;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod index;
pub mod pipeline;
pub mod trec;

pub use error::{Error, Result};
