use serde::{Deserialize, Serialize};

/// Something the pipeline did on its own authority: a fallback, a forced
/// decision, a retained document. Recorded in the run log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent_id: Option<usize>,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// A structured reply failed to parse and was requested again.
    ParseRetry,
    /// The sufficiency verdict was coerced to "sufficient".
    ForcedSufficient,
    /// The chain was ended without the model saying so.
    ForcedDone,
    IntentAbandoned,
    /// Decomposition produced no usable query; the intent text was used.
    EmptyDecomposition,
    /// A document was kept because its filter verdict was unusable.
    FilterRetained,
    ExtractFailed,
    /// Synthesis failed; the summary is the concatenated evidence.
    ReduceFallback,
}

impl Event {
    pub fn new(intent_id: Option<usize>, kind: EventKind, detail: impl Into<String>) -> Self {
        Self {
            intent_id,
            kind,
            detail: detail.into(),
        }
    }
}
