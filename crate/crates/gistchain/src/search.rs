//! Where atomic queries are answered.
//!
//! [`SearchBackend`] is the fetch-adapter seam: the agent only needs ranked
//! hits plus document and gist lookup. [`LocalSearch`] answers from the
//! engine's own hybrid index; a web-search adapter would implement the same
//! trait.

use gistchain_core::{Document, GistMemory, HybridIndex, IndexError, Retrieval};

use crate::gateway::{Gateway, GatewayError};
use crate::store::CorpusStore;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RetrievalError {
    #[error("embedding the query failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("search backend failed: {0}")]
    Backend(String),
}

pub trait SearchBackend: Sync {
    fn search(&self, query: &str, k: usize, alpha: f64) -> Result<Retrieval, RetrievalError>;
    fn document(&self, doc_id: &str) -> Option<&Document>;
    fn gist(&self, doc_id: &str) -> Option<&GistMemory>;
}

pub struct LocalSearch<'a> {
    store: &'a CorpusStore,
    index: &'a HybridIndex,
    gateway: &'a Gateway,
}

impl<'a> LocalSearch<'a> {
    pub fn new(store: &'a CorpusStore, index: &'a HybridIndex, gateway: &'a Gateway) -> Self {
        Self { store, index, gateway }
    }
}

impl SearchBackend for LocalSearch<'_> {
    /// Embeds the raw query with the embedder role, then runs fused
    /// retrieval.
    fn search(&self, query: &str, k: usize, alpha: f64) -> Result<Retrieval, RetrievalError> {
        if self.index.is_empty() {
            return Ok(Retrieval {
                alpha,
                hits: Vec::new(),
            });
        }
        let q_vec = self.gateway.embed_one(query)?;
        Ok(self.index.retrieve(query, &q_vec, alpha, k)?)
    }

    fn document(&self, doc_id: &str) -> Option<&Document> {
        self.store.document(doc_id)
    }

    fn gist(&self, doc_id: &str) -> Option<&GistMemory> {
        self.store.gist(doc_id)
    }
}
