//! Allocation-only core of the gistchain retrieval engine.
//!
//! Everything here is pure: tokenization and normalization, BM25 and dense
//! scoring, hybrid fusion, the knowledge-chain data model, structured-reply
//! parsing, context rendering and Exact Match scoring. IO, model providers
//! and orchestration live in the `gistchain` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod chain;
pub mod context;
pub mod dense;
pub mod document;
mod error;
pub mod eval;
pub mod hybrid;
pub mod sparse;
pub mod structured;
pub mod text;

pub use chain::{AtomicQuery, AtomicSpace, EvidenceUnit, Intent, IntentStatus, KnowledgeSubspace};
pub use context::{assemble, ContextStep, TaskContext};
pub use document::{Document, GistGenerator, GistMemory, SourceFormat};
pub use error::{ContextError, IndexError, IngestError};
pub use hybrid::{HybridIndex, IndexEntry, RankedHit, Retrieval};
pub use sparse::{Bm25Params, SparseIndex};
