//! Provider gateway: chat completion for the central, auxiliary and
//! downstream roles, embeddings for the embedder role, retries with
//! exponential backoff and a shared token ledger.
//!
//! Only successful calls are written to the ledger; failed attempts go to a
//! separate failure list. The gateway itself does not serialize central
//! calls: the reasoning loop is sequential by construction.

mod http;
mod ledger;
mod mock;

use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use gistchain_core::dense;

pub use http::{HttpChat, HttpEmbed, HttpSettings};
pub use ledger::{CallRecord, FailureRecord, LedgerTotals, TokenLedger};
pub use mock::{MockEmbedder, MockRole, MockRule, MockScript, ScriptedMock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Central,
    Auxiliary,
    Embedder,
    Downstream,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Role::Central => "central",
            Role::Auxiliary => "auxiliary",
            Role::Embedder => "embedder",
            Role::Downstream => "downstream",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

impl Message {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: "system".into(),
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: "user".into(),
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: "assistant".into(),
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl Usage {
    pub fn new(prompt_tokens: u64, completion_tokens: u64) -> Self {
        Self {
            prompt_tokens,
            completion_tokens,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completion {
    pub text: String,
    pub usage: Usage,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("request timed out")]
    Timeout,
    #[error("http status {0}")]
    Status(u16),
    #[error("transport failure: {0}")]
    Io(String),
    #[error("malformed response: {0}")]
    Malformed(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Timeout | TransportError::Io(_) => true,
            TransportError::Status(code) => *code == 429 || *code >= 500,
            TransportError::Malformed(_) => false,
        }
    }
}

pub trait ChatBackend: Send + Sync {
    fn chat(&self, messages: &[Message]) -> Result<Completion, TransportError>;
}

pub trait EmbedBackend: Send + Sync {
    fn embed(&self, texts: &[String]) -> Result<(Vec<Vec<f32>>, Usage), TransportError>;
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// A clock that never moves; used for reproducible run logs.
#[derive(Debug, Default, Clone, Copy)]
pub struct FrozenClock(pub u64);

impl Clock for FrozenClock {
    fn now_ms(&self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            base_delay_ms: 500,
            max_delay_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    pub fn delay(&self, attempt: u32) -> Duration {
        let ms = self.base_delay_ms.saturating_mul(1u64 << attempt.min(20));
        Duration::from_millis(ms.min(self.max_delay_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error("no provider configured for the {0} role")]
    NotConfigured(Role),
    #[error("{role} provider failed after {attempts} attempt(s): {message}")]
    Provider { role: Role, attempts: u32, message: String },
    #[error("{role} provider timed out after {attempts} attempt(s)")]
    Timeout { role: Role, attempts: u32 },
    #[error("embedding dimension changed from {expected} to {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("embedder returned {got} vectors for {expected} inputs")]
    CountMismatch { expected: usize, got: usize },
    #[error("embedder returned a zero vector")]
    ZeroVector,
}

struct ChatSlot {
    backend: Arc<dyn ChatBackend>,
    retry: RetryPolicy,
}

struct EmbedSlot {
    backend: Arc<dyn EmbedBackend>,
    retry: RetryPolicy,
    batch_size: usize,
}

pub struct Gateway {
    central: Option<ChatSlot>,
    auxiliary: Option<ChatSlot>,
    downstream: Option<ChatSlot>,
    embedder: Option<EmbedSlot>,
    dimension: Mutex<Option<usize>>,
    ledger: TokenLedger,
    clock: Arc<dyn Clock>,
}

impl Default for Gateway {
    fn default() -> Self {
        Self::new()
    }
}

impl Gateway {
    pub fn new() -> Self {
        Self {
            central: None,
            auxiliary: None,
            downstream: None,
            embedder: None,
            dimension: Mutex::new(None),
            ledger: TokenLedger::new(),
            clock: Arc::new(SystemClock),
        }
    }

    pub fn with_chat(mut self, role: Role, backend: Arc<dyn ChatBackend>, retry: RetryPolicy) -> Self {
        let slot = Some(ChatSlot { backend, retry });
        match role {
            Role::Central => self.central = slot,
            Role::Auxiliary => self.auxiliary = slot,
            Role::Downstream => self.downstream = slot,
            Role::Embedder => panic!("embedder role takes an EmbedBackend"),
        }
        self
    }

    pub fn with_embedder(mut self, backend: Arc<dyn EmbedBackend>, retry: RetryPolicy, batch_size: usize) -> Self {
        self.embedder = Some(EmbedSlot {
            backend,
            retry,
            batch_size: batch_size.max(1),
        });
        self
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    pub fn ledger(&self) -> &TokenLedger {
        &self.ledger
    }

    pub fn clock(&self) -> &dyn Clock {
        self.clock.as_ref()
    }

    pub fn has_role(&self, role: Role) -> bool {
        match role {
            Role::Central => self.central.is_some(),
            Role::Auxiliary => self.auxiliary.is_some(),
            Role::Downstream => self.downstream.is_some() || self.central.is_some(),
            Role::Embedder => self.embedder.is_some(),
        }
    }

    /// Chat completion for a text role. The downstream role falls back to
    /// the central backend when it has no backend of its own; its usage is
    /// still billed to the downstream bucket.
    pub fn complete(&self, role: Role, messages: &[Message]) -> Result<Completion, GatewayError> {
        let slot = match role {
            Role::Central => self.central.as_ref(),
            Role::Auxiliary => self.auxiliary.as_ref(),
            Role::Downstream => self.downstream.as_ref().or(self.central.as_ref()),
            Role::Embedder => None,
        }
        .ok_or(GatewayError::NotConfigured(role))?;
        let completion = self.with_retries(role, slot.retry, || slot.backend.chat(messages))?;
        self.ledger.record(role, completion.usage, self.clock.now_ms());
        Ok(completion)
    }

    /// Embed texts in batches, returning unit vectors of one fixed dimension.
    pub fn embed(&self, texts: &[String]) -> Result<Vec<Vec<f32>>, GatewayError> {
        if texts.is_empty() {
            return Ok(Vec::new());
        }
        let slot = self
            .embedder
            .as_ref()
            .ok_or(GatewayError::NotConfigured(Role::Embedder))?;
        let mut out = Vec::with_capacity(texts.len());
        for batch in texts.chunks(slot.batch_size) {
            let (vectors, usage) = self.with_retries(Role::Embedder, slot.retry, || slot.backend.embed(batch))?;
            if vectors.len() != batch.len() {
                return Err(GatewayError::CountMismatch {
                    expected: batch.len(),
                    got: vectors.len(),
                });
            }
            for mut v in vectors {
                self.check_dimension(v.len())?;
                if !dense::normalize(&mut v) {
                    return Err(GatewayError::ZeroVector);
                }
                out.push(v);
            }
            self.ledger.record(Role::Embedder, usage, self.clock.now_ms());
        }
        Ok(out)
    }

    pub fn embed_one(&self, text: &str) -> Result<Vec<f32>, GatewayError> {
        let mut v = self.embed(&[text.to_string()])?;
        Ok(v.pop().expect("one input yields one vector"))
    }

    /// Dimension observed so far, if any embedding has been produced.
    pub fn dimension(&self) -> Option<usize> {
        *self.dimension.lock().expect("dimension lock poisoned")
    }

    fn check_dimension(&self, actual: usize) -> Result<(), GatewayError> {
        let mut dim = self.dimension.lock().expect("dimension lock poisoned");
        match *dim {
            None if actual > 0 => {
                *dim = Some(actual);
                Ok(())
            }
            Some(expected) if expected == actual => Ok(()),
            expected => Err(GatewayError::DimensionMismatch {
                expected: expected.unwrap_or(0),
                actual,
            }),
        }
    }

    fn with_retries<T>(
        &self,
        role: Role,
        policy: RetryPolicy,
        mut call: impl FnMut() -> Result<T, TransportError>,
    ) -> Result<T, GatewayError> {
        let mut attempt = 0u32;
        loop {
            match call() {
                Ok(v) => return Ok(v),
                Err(err) => {
                    self.ledger
                        .record_failure(role, attempt, err.to_string(), self.clock.now_ms());
                    let attempts = attempt + 1;
                    if !err.retryable() || attempt >= policy.max_retries {
                        return Err(match err {
                            TransportError::Timeout => GatewayError::Timeout { role, attempts },
                            other => GatewayError::Provider {
                                role,
                                attempts,
                                message: other.to_string(),
                            },
                        });
                    }
                    std::thread::sleep(policy.delay(attempt));
                    attempt += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    struct Flaky {
        failures_left: AtomicU32,
        error: TransportError,
    }

    impl ChatBackend for Flaky {
        fn chat(&self, _: &[Message]) -> Result<Completion, TransportError> {
            if self
                .failures_left
                .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| n.checked_sub(1))
                .is_ok()
            {
                return Err(self.error.clone());
            }
            Ok(Completion {
                text: "ok".into(),
                usage: Usage::new(3, 2),
            })
        }
    }

    fn fast(max_retries: u32) -> RetryPolicy {
        RetryPolicy {
            max_retries,
            base_delay_ms: 1,
            max_delay_ms: 2,
        }
    }

    fn flaky(n: u32, error: TransportError) -> Arc<Flaky> {
        Arc::new(Flaky {
            failures_left: AtomicU32::new(n),
            error,
        })
    }

    #[test]
    fn retries_then_succeeds_without_duplicate_ledger_entries() {
        let gw = Gateway::new().with_chat(Role::Auxiliary, flaky(2, TransportError::Io("reset".into())), fast(3));
        let c = gw.complete(Role::Auxiliary, &[Message::user("x")]).unwrap();
        assert_eq!(c.text, "ok");
        assert_eq!(gw.ledger().calls().len(), 1);
        assert_eq!(gw.ledger().failures().len(), 2);
        assert_eq!(gw.ledger().processing_tokens(), 5);
    }

    #[test]
    fn exhausted_retries_surface_errors() {
        let gw = Gateway::new()
            .with_chat(Role::Central, flaky(10, TransportError::Timeout), fast(2))
            .with_chat(Role::Auxiliary, flaky(10, TransportError::Status(503)), fast(1));
        assert_eq!(
            gw.complete(Role::Central, &[]),
            Err(GatewayError::Timeout {
                role: Role::Central,
                attempts: 3
            })
        );
        assert!(matches!(
            gw.complete(Role::Auxiliary, &[]),
            Err(GatewayError::Provider { attempts: 2, .. })
        ));
        assert!(gw.ledger().calls().is_empty());
        assert_eq!(gw.ledger().failures().len(), 5);
    }

    #[test]
    fn client_errors_are_not_retried() {
        let gw = Gateway::new().with_chat(Role::Central, flaky(10, TransportError::Status(400)), fast(5));
        assert!(matches!(
            gw.complete(Role::Central, &[]),
            Err(GatewayError::Provider { attempts: 1, .. })
        ));
    }

    #[test]
    fn unconfigured_roles() {
        let gw = Gateway::new();
        assert_eq!(
            gw.complete(Role::Central, &[]),
            Err(GatewayError::NotConfigured(Role::Central))
        );
        assert_eq!(gw.embed(&[]), Ok(vec![]));
        assert_eq!(
            gw.embed(&["a".into()]),
            Err(GatewayError::NotConfigured(Role::Embedder))
        );
    }

    #[test]
    fn downstream_falls_back_to_central_but_bills_separately() {
        let gw = Gateway::new().with_chat(Role::Central, flaky(0, TransportError::Timeout), fast(0));
        gw.complete(Role::Downstream, &[]).unwrap();
        assert_eq!(gw.ledger().reasoning_tokens(), 0);
        assert_eq!(gw.ledger().downstream_tokens(), 5);
    }

    struct Shifty(AtomicU32);

    impl EmbedBackend for Shifty {
        fn embed(&self, texts: &[String]) -> Result<(Vec<Vec<f32>>, Usage), TransportError> {
            let dim = 2 + self.0.fetch_add(1, Ordering::SeqCst) as usize;
            Ok((texts.iter().map(|_| vec![1.0; dim]).collect(), Usage::new(1, 0)))
        }
    }

    #[test]
    fn embedding_dimension_must_not_change() {
        let gw = Gateway::new().with_embedder(Arc::new(Shifty(AtomicU32::new(0))), fast(0), 4);
        let first = gw.embed(&["a".into()]).unwrap();
        assert!((dense::l2_norm(&first[0]) - 1.0).abs() < 1e-6);
        assert_eq!(
            gw.embed(&["b".into()]),
            Err(GatewayError::DimensionMismatch { expected: 2, actual: 3 })
        );
    }

    #[test]
    fn backoff_grows_and_caps() {
        let p = RetryPolicy {
            max_retries: 5,
            base_delay_ms: 100,
            max_delay_ms: 1000,
        };
        assert_eq!(p.delay(0), Duration::from_millis(100));
        assert_eq!(p.delay(2), Duration::from_millis(400));
        assert_eq!(p.delay(9), Duration::from_millis(1000));
    }
}
