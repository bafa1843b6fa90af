//! Documents and their gist memories.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::IngestError;
use crate::text;

/// Default token budget for model-written gists.
pub const DEFAULT_GIST_BUDGET: usize = 512;
/// Default token budget for truncation (bootstrap) gists.
pub const DEFAULT_BOOTSTRAP_BUDGET: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    Html,
    /// Text already extracted from a PDF by an external tool.
    PdfText,
    Plain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub source: String,
    pub title: Option<String>,
    pub raw_text: String,
    /// Seconds since the Unix epoch, UTC. Zero when unknown.
    pub fetched_at: i64,
    pub token_count: usize,
}

impl Document {
    /// Build a document from already-normalized text, computing its token
    /// count. `doc_id` defaults to the content hash.
    pub fn from_text(doc_id: Option<String>, source: &str, text: String) -> Self {
        let token_count = text::token_count(&text);
        let doc_id = doc_id.unwrap_or_else(|| text::content_hash(&text));
        Self {
            doc_id,
            source: source.to_string(),
            title: None,
            raw_text: text,
            fetched_at: 0,
            token_count,
        }
    }

    pub fn with_title(mut self, title: Option<String>) -> Self {
        self.title = title.map(|t| text::normalize_text(&t)).filter(|t| !t.is_empty());
        self
    }

    pub fn with_fetched_at(mut self, secs: i64) -> Self {
        self.fetched_at = secs;
        self
    }
}

/// Decode, extract and normalize raw bytes into a [`Document`] whose id is
/// the hex content hash of the normalized text.
pub fn ingest(raw: &[u8], source: &str, format: SourceFormat) -> Result<Document, IngestError> {
    let decoded = core::str::from_utf8(raw).map_err(|e| IngestError::Decode {
        offset: e.valid_up_to(),
    })?;
    let extracted = match format {
        SourceFormat::Html => text::strip_html(decoded),
        SourceFormat::PdfText | SourceFormat::Plain => decoded.to_string(),
    };
    let normalized = text::normalize_text(&extracted);
    if normalized.is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    Ok(Document::from_text(None, source, normalized))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GistGenerator {
    Llm,
    Truncation,
    Verbatim,
}

/// A compact abstraction of one document, embedded for dense retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GistMemory {
    pub doc_id: String,
    pub gist_text: String,
    /// Unit-normalized embedding of `gist_text`. Empty until embedded.
    pub embedding: Vec<f32>,
    pub generator: GistGenerator,
}

impl GistMemory {
    pub fn is_embedded(&self) -> bool {
        !self.embedding.is_empty()
    }
}

/// Gist made of the first `budget` tokens of the document.
pub fn bootstrap_gist(doc: &Document, budget: usize) -> GistMemory {
    GistMemory {
        doc_id: doc.doc_id.clone(),
        gist_text: text::truncate_tokens(&doc.raw_text, budget).to_string(),
        embedding: Vec::new(),
        generator: GistGenerator::Truncation,
    }
}

/// The document's own text, used when it already fits the gist budget.
pub fn verbatim_gist(doc: &Document) -> GistMemory {
    GistMemory {
        doc_id: doc.doc_id.clone(),
        gist_text: doc.raw_text.clone(),
        embedding: Vec::new(),
        generator: GistGenerator::Verbatim,
    }
}

/// Wrap a model response as a gist, truncated to `budget` tokens.
pub fn model_gist(doc: &Document, response: &str, budget: usize) -> GistMemory {
    let trimmed = text::normalize_text(response);
    GistMemory {
        doc_id: doc.doc_id.clone(),
        gist_text: text::truncate_tokens(&trimmed, budget).to_string(),
        embedding: Vec::new(),
        generator: GistGenerator::Llm,
    }
}
