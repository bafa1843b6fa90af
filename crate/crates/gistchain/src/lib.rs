//! Agentic retrieval engine built on the `gistchain-core` algorithms: corpus
//! ingestion and gist memories, hybrid index persistence, the provider
//! gateway, intent-driven discovery with map–reduce evidence synthesis,
//! run logs, and the command-line front end.

pub mod config;
pub mod discovery;
pub mod events;
pub mod gateway;
pub mod index_store;
pub mod pipeline;
pub mod pool;
pub mod prompts;
pub mod runlog;
pub mod scoring;
pub mod search;
pub mod store;
pub mod synthesis;

pub use gistchain_core as core;

use sha2::{Digest, Sha256};

/// Lowercase hex SHA-256 of a byte string.
pub fn checksum(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}
