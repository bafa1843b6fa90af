//! Token accounting split into reasoning (central), processing (auxiliary
//! and embedder) and downstream (answer generation) buckets.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Role, Usage};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallRecord {
    pub role: Role,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
    pub timestamp_ms: u64,
}

impl CallRecord {
    pub fn total(&self) -> u64 {
        self.prompt_tokens + self.completion_tokens
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub role: Role,
    pub attempt: u32,
    pub error: String,
    pub timestamp_ms: u64,
}

/// Totals as they appear in run logs.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerTotals {
    pub reasoning_tokens: u64,
    pub processing_tokens: u64,
    pub downstream_tokens: u64,
    pub central_calls: u64,
    pub auxiliary_calls: u64,
    pub embedder_calls: u64,
    pub downstream_calls: u64,
    pub failed_attempts: u64,
}

#[derive(Debug, Default)]
pub struct TokenLedger {
    reasoning: AtomicU64,
    processing: AtomicU64,
    downstream: AtomicU64,
    calls: Mutex<Vec<CallRecord>>,
    failures: Mutex<Vec<FailureRecord>>,
}

impl TokenLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn record(&self, role: Role, usage: Usage, timestamp_ms: u64) {
        let total = usage.prompt_tokens + usage.completion_tokens;
        let bucket = match role {
            Role::Central => &self.reasoning,
            Role::Auxiliary | Role::Embedder => &self.processing,
            Role::Downstream => &self.downstream,
        };
        bucket.fetch_add(total, Ordering::SeqCst);
        self.calls.lock().expect("ledger poisoned").push(CallRecord {
            role,
            prompt_tokens: usage.prompt_tokens,
            completion_tokens: usage.completion_tokens,
            timestamp_ms,
        });
    }

    pub(crate) fn record_failure(&self, role: Role, attempt: u32, error: String, timestamp_ms: u64) {
        self.failures.lock().expect("ledger poisoned").push(FailureRecord {
            role,
            attempt,
            error,
            timestamp_ms,
        });
    }

    pub fn reasoning_tokens(&self) -> u64 {
        self.reasoning.load(Ordering::SeqCst)
    }

    pub fn processing_tokens(&self) -> u64 {
        self.processing.load(Ordering::SeqCst)
    }

    pub fn downstream_tokens(&self) -> u64 {
        self.downstream.load(Ordering::SeqCst)
    }

    /// Successful calls in completion order.
    pub fn calls(&self) -> Vec<CallRecord> {
        self.calls.lock().expect("ledger poisoned").clone()
    }

    pub fn failures(&self) -> Vec<FailureRecord> {
        self.failures.lock().expect("ledger poisoned").clone()
    }

    pub fn totals(&self) -> LedgerTotals {
        let calls = self.calls.lock().expect("ledger poisoned");
        let count = |r: Role| calls.iter().filter(|c| c.role == r).count() as u64;
        LedgerTotals {
            reasoning_tokens: self.reasoning_tokens(),
            processing_tokens: self.processing_tokens(),
            downstream_tokens: self.downstream_tokens(),
            central_calls: count(Role::Central),
            auxiliary_calls: count(Role::Auxiliary),
            embedder_calls: count(Role::Embedder),
            downstream_calls: count(Role::Downstream),
            failed_attempts: self.failures.lock().expect("ledger poisoned").len() as u64,
        }
    }
}
