use alloc::string::String;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IngestError {
    #[error("document is empty after text extraction")]
    EmptyDocument,
    #[error("invalid UTF-8 at byte {offset}")]
    Decode { offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IndexError {
    #[error("embedding dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("unknown document {0}")]
    UnknownDocument(String),
    #[error("duplicate document {0}")]
    DuplicateDocument(String),
    #[error("zero-norm embedding for {0}")]
    ZeroVector(String),
    #[error("inconsistent index data: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ContextError {
    #[error("rendered context needs {needed} tokens even with all evidence removed; budget is {budget}")]
    ContextOverflow { needed: usize, budget: usize },
    #[error("nothing to assemble: no steps and no preamble")]
    Empty,
    #[error("steps must be numbered 1..N without gaps (found {found} at position {position})")]
    BrokenChain { position: usize, found: usize },
}
