//! The knowledge chain: intents, their atomic queries, and the evidence
//! subspaces that resolve them.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hybrid::RankedHit;
use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentStatus {
    Open,
    Resolved,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomicQuery {
    pub query_id: String,
    pub intent_id: usize,
    pub text: String,
    /// 0 for the initial decomposition, `r` for queries added by expansion
    /// round `r`.
    pub depth: usize,
    pub issued_at_round: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Intent {
    /// 1-based position in the chain.
    pub intent_id: usize,
    pub description: String,
    pub status: IntentStatus,
    pub queries: Vec<AtomicQuery>,
    pub rounds_used: usize,
}

impl Intent {
    pub fn new(intent_id: usize, description: impl Into<String>) -> Self {
        Self {
            intent_id,
            description: description.into(),
            status: IntentStatus::Open,
            queries: Vec::new(),
            rounds_used: 0,
        }
    }

    pub fn query_keys(&self) -> BTreeSet<String> {
        self.queries.iter().map(|q| text::query_key(&q.text)).collect()
    }

    /// Add the candidate queries that are new to this intent (by normalized
    /// text), at most `limit` of them, in candidate order. Returns the
    /// added queries.
    pub fn admit_queries<I, S>(&mut self, candidates: I, round: usize, limit: usize) -> Vec<AtomicQuery>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut seen = self.query_keys();
        let mut added = Vec::new();
        for c in candidates {
            if added.len() >= limit {
                break;
            }
            let text = text::normalize_text(c.as_ref());
            if text.is_empty() || !seen.insert(text.to_lowercase()) {
                continue;
            }
            let q = AtomicQuery {
                query_id: alloc::format!("q{}.{}", self.intent_id, self.queries.len() + 1),
                intent_id: self.intent_id,
                text,
                depth: round,
                issued_at_round: round,
            };
            self.queries.push(q.clone());
            added.push(q);
        }
        added
    }
}

/// Documents returned by one atomic query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicSpace {
    pub query_id: String,
    pub hits: Vec<RankedHit>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceUnit {
    pub doc_id: String,
    pub intent_id: usize,
    pub content: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub salience_note: Option<String>,
}

/// Synthesized evidence resolving one intent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeSubspace {
    pub intent_id: usize,
    pub summary: String,
    pub units: Vec<EvidenceUnit>,
    pub retrieved_count: usize,
    pub browsed_count: usize,
    /// Set when no evidence was found.
    pub empty: bool,
}

impl KnowledgeSubspace {
    pub fn empty(intent_id: usize) -> Self {
        Self {
            intent_id,
            summary: String::new(),
            units: Vec::new(),
            retrieved_count: 0,
            browsed_count: 0,
            empty: true,
        }
    }
}
