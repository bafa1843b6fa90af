//! Corpus store: documents, their gist memories, and the on-disk layout.
//!
//! A persisted store is a directory holding
//!
//! - `manifest.json`: format tag, version, embedding dimension, document ids
//!   in row order and SHA-256 checksums of the two data files;
//! - `documents.jsonl`: one JSON object per document (with its gist text);
//! - `embeddings.f32`: gist embeddings as little-endian `f32`, row-major,
//!   row `i` belonging to the `i`-th manifest entry.

use std::collections::HashMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use gistchain_core::document::{self, SourceFormat};
use gistchain_core::{text, Document, GistGenerator, GistMemory, IngestError};

use crate::checksum;
use crate::gateway::{Gateway, GatewayError, Role};
use crate::pool::bounded_map;
use crate::prompts;

pub const STORE_FORMAT: &str = "gistchain-store";
pub const STORE_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const EMBEDDINGS_FILE: &str = "embeddings.f32";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported store format {found:?} version {version}")]
    SchemaVersionMismatch { found: String, version: u32 },
    #[error("checksum mismatch for {0}")]
    ChecksumMismatch(String),
    #[error("malformed store data: {0}")]
    Malformed(String),
    #[error("document {0} is not in the store")]
    UnknownDocument(String),
    #[error("document id {0} already holds different text")]
    DuplicateId(String),
    #[error("document {0} has no embedded gist")]
    MissingGist(String),
    #[error("embedding dimension mismatch: store has {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("corpus line {line}: {message}")]
    Corpus { line: usize, message: String },
    #[error("EmptyCorpus: no documents in {0}")]
    EmptyCorpus(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GistMode {
    Llm,
    Truncation,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Inserted {
    New,
    AlreadyPresent,
}

/// In-memory corpus. Reads take `&self` and are safe to share across
/// threads; mutation goes through `&mut self`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorpusStore {
    docs: Vec<Document>,
    gists: Vec<Option<GistMemory>>,
    rows: HashMap<String, usize>,
    dimension: Option<usize>,
}

impl CorpusStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    pub fn documents(&self) -> &[Document] {
        &self.docs
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.rows.get(doc_id).map(|&r| &self.docs[r])
    }

    pub fn gist(&self, doc_id: &str) -> Option<&GistMemory> {
        self.rows.get(doc_id).and_then(|&r| self.gists[r].as_ref())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Document, Option<&GistMemory>)> {
        self.docs.iter().zip(self.gists.iter().map(Option::as_ref))
    }

    /// Add a document. Re-inserting identical text under the same id is a
    /// no-op; different text under an existing id is an error.
    pub fn insert(&mut self, doc: Document) -> Result<Inserted, StoreError> {
        if let Some(&row) = self.rows.get(&doc.doc_id) {
            return if self.docs[row].raw_text == doc.raw_text {
                Ok(Inserted::AlreadyPresent)
            } else {
                Err(StoreError::DuplicateId(doc.doc_id))
            };
        }
        self.rows.insert(doc.doc_id.clone(), self.docs.len());
        self.docs.push(doc);
        self.gists.push(None);
        Ok(Inserted::New)
    }

    /// Normalize raw bytes into a document and store it.
    pub fn ingest(&mut self, raw: &[u8], source: &str, format: SourceFormat) -> Result<&Document, StoreError> {
        let doc = document::ingest(raw, source, format)?;
        let id = doc.doc_id.clone();
        self.insert(doc)?;
        Ok(self.document(&id).expect("just inserted"))
    }

    /// Attach an embedded gist to its document.
    pub fn set_gist(&mut self, gist: GistMemory) -> Result<(), StoreError> {
        let row = *self
            .rows
            .get(&gist.doc_id)
            .ok_or_else(|| StoreError::UnknownDocument(gist.doc_id.clone()))?;
        if !gist.is_embedded() {
            return Err(StoreError::MissingGist(gist.doc_id));
        }
        match self.dimension {
            Some(d) if d != gist.embedding.len() => {
                return Err(StoreError::DimensionMismatch {
                    expected: d,
                    actual: gist.embedding.len(),
                })
            }
            _ => self.dimension = Some(gist.embedding.len()),
        }
        self.gists[row] = Some(gist);
        Ok(())
    }

    /// Produce, embed and attach gists for every document lacking one.
    /// Gist text generation runs on up to `workers` threads; returns the
    /// number of gists attached.
    pub fn build_gists(
        &mut self,
        gateway: &Gateway,
        mode: GistMode,
        budget: usize,
        workers: usize,
    ) -> Result<usize, StoreError> {
        let pending: Vec<&Document> = self
            .docs
            .iter()
            .zip(&self.gists)
            .filter(|(_, g)| g.is_none())
            .map(|(d, _)| d)
            .collect();
        let drafts: Vec<Result<GistMemory, GatewayError>> = match mode {
            GistMode::Truncation => pending
                .iter()
                .map(|d| Ok(document::bootstrap_gist(d, budget)))
                .collect(),
            GistMode::Llm => bounded_map(&pending, workers, |d| generate_gist(d, gateway, budget)),
        };
        let mut gists = drafts.into_iter().collect::<Result<Vec<_>, _>>()?;
        let texts: Vec<String> = gists.iter().map(|g| g.gist_text.clone()).collect();
        let vectors = gateway.embed(&texts)?;
        for (g, v) in gists.iter_mut().zip(vectors) {
            g.embedding = v;
        }
        let n = gists.len();
        for g in gists {
            self.set_gist(g)?;
        }
        Ok(n)
    }

    pub fn persist(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut docs_out = String::new();
        let mut emb_out: Vec<u8> = Vec::new();
        for (doc, gist) in self.entries() {
            let gist = gist.ok_or_else(|| StoreError::MissingGist(doc.doc_id.clone()))?;
            let record = DocumentRecord::new(doc, gist);
            docs_out.push_str(&serde_json::to_string(&record).expect("record serializes"));
            docs_out.push('\n');
            for x in &gist.embedding {
                emb_out.extend_from_slice(&x.to_le_bytes());
            }
        }
        let manifest = StoreManifest {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
            dimension: self.dimension.unwrap_or(0),
            doc_count: self.docs.len(),
            entries: self.docs.iter().map(|d| d.doc_id.clone()).collect(),
            checksums: Checksums {
                documents: checksum(docs_out.as_bytes()),
                embeddings: checksum(&emb_out),
            },
        };
        write(&dir.join(DOCUMENTS_FILE), docs_out.as_bytes())?;
        write(&dir.join(EMBEDDINGS_FILE), &emb_out)?;
        let mut m = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        m.push('\n');
        write(&dir.join(MANIFEST_FILE), m.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let manifest: StoreManifest = read_manifest(&dir.join(MANIFEST_FILE))?;
        if manifest.format != STORE_FORMAT || manifest.version != STORE_VERSION {
            return Err(StoreError::SchemaVersionMismatch {
                found: manifest.format,
                version: manifest.version,
            });
        }
        let docs_raw = read(&dir.join(DOCUMENTS_FILE))?;
        if checksum(&docs_raw) != manifest.checksums.documents {
            return Err(StoreError::ChecksumMismatch(DOCUMENTS_FILE.into()));
        }
        let emb_raw = read(&dir.join(EMBEDDINGS_FILE))?;
        if checksum(&emb_raw) != manifest.checksums.embeddings {
            return Err(StoreError::ChecksumMismatch(EMBEDDINGS_FILE.into()));
        }
        let d = manifest.dimension;
        let n = manifest.doc_count;
        if manifest.entries.len() != n || emb_raw.len() != n * d * 4 || (n > 0 && d == 0) {
            return Err(StoreError::Malformed("manifest counts disagree with data files".into()));
        }
        let docs_text = String::from_utf8(docs_raw).map_err(|e| StoreError::Malformed(e.to_string()))?;
        let mut store = CorpusStore::new();
        let mut floats = emb_raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")));
        for (i, line) in docs_text.lines().enumerate() {
            let record: DocumentRecord = serde_json::from_str(line)
                .map_err(|e| StoreError::Malformed(format!("documents line {}: {e}", i + 1)))?;
            if manifest.entries.get(i) != Some(&record.doc_id) {
                return Err(StoreError::Malformed(format!(
                    "documents line {} is out of manifest order",
                    i + 1
                )));
            }
            let embedding: Vec<f32> = floats.by_ref().take(d).collect();
            let (doc, gist) = record.into_parts(embedding)?;
            store.insert(doc)?;
            store.set_gist(gist)?;
        }
        if store.len() != n {
            return Err(StoreError::Malformed("document count differs from manifest".into()));
        }
        Ok(store)
    }
}

/// Gist through the auxiliary model, or the verbatim text when the document
/// already fits the budget. The gist is not yet embedded.
pub fn generate_gist(doc: &Document, gateway: &Gateway, budget: usize) -> Result<GistMemory, GatewayError> {
    if doc.token_count <= budget {
        return Ok(document::verbatim_gist(doc));
    }
    let reply = gateway.complete(
        Role::Auxiliary,
        &prompts::gist(doc.title.as_deref(), &doc.raw_text, budget),
    )?;
    Ok(document::model_gist(doc, &reply.text, budget))
}

#[derive(Debug, Serialize, Deserialize)]
struct Checksums {
    documents: String,
    embeddings: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreManifest {
    format: String,
    version: u32,
    dimension: usize,
    doc_count: usize,
    entries: Vec<String>,
    checksums: Checksums,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRecord {
    doc_id: String,
    source: String,
    title: Option<String>,
    fetched_at: String,
    token_count: usize,
    raw_text: String,
    gist_text: String,
    generator: GistGenerator,
}

impl DocumentRecord {
    fn new(doc: &Document, gist: &GistMemory) -> Self {
        Self {
            doc_id: doc.doc_id.clone(),
            source: doc.source.clone(),
            title: doc.title.clone(),
            fetched_at: format_timestamp(doc.fetched_at),
            token_count: doc.token_count,
            raw_text: doc.raw_text.clone(),
            gist_text: gist.gist_text.clone(),
            generator: gist.generator,
        }
    }

    fn into_parts(self, embedding: Vec<f32>) -> Result<(Document, GistMemory), StoreError> {
        let fetched_at = parse_timestamp(&self.fetched_at).map_err(StoreError::Malformed)?;
        if text::token_count(&self.raw_text) != self.token_count {
            return Err(StoreError::Malformed(format!(
                "token count of {} does not match its text",
                self.doc_id
            )));
        }
        let doc = Document {
            doc_id: self.doc_id.clone(),
            source: self.source,
            title: self.title,
            raw_text: self.raw_text,
            fetched_at,
            token_count: self.token_count,
        };
        let gist = GistMemory {
            doc_id: self.doc_id,
            gist_text: self.gist_text,
            embedding,
            generator: self.generator,
        };
        Ok((doc, gist))
    }
}

pub fn format_timestamp(secs: i64) -> String {
    DateTime::<Utc>::from_timestamp(secs, 0)
        .unwrap_or_default()
        .to_rfc3339_opts(SecondsFormat::Secs, true)
}

pub fn parse_timestamp(s: &str) -> Result<i64, String> {
    DateTime::parse_from_rfc3339(s)
        .map(|t| t.timestamp())
        .map_err(|e| format!("bad timestamp {s:?}: {e}"))
}

fn read_manifest<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let raw = read(path)?;
    serde_json::from_slice(&raw).map_err(|e| StoreError::Malformed(format!("{}: {e}", path.display())))
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, StoreError> {
    fs::read(path).map_err(io_err(path))
}

pub(crate) fn write(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    fs::write(path, bytes).map_err(io_err(path))
}

/// One line of the corpus input file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusRecord {
    #[serde(default)]
    pub id: Option<String>,
    pub url: String,
    #[serde(default)]
    pub title: Option<String>,
    pub text: String,
    #[serde(default)]
    pub fetched_at: Option<String>,
}

/// Read a JSON-lines corpus into documents. A record's `id`, when present,
/// replaces the content-hash id. Blank lines are skipped.
pub fn read_corpus(path: &Path, format: SourceFormat) -> Result<Vec<Document>, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let corpus_err = |message: String| StoreError::Corpus { line: i + 1, message };
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| corpus_err(e.to_string()))?;
        let mut doc = document::ingest(rec.text.as_bytes(), &rec.url, format).map_err(|e| corpus_err(e.to_string()))?;
        if let Some(id) = rec.id.filter(|s| !s.trim().is_empty()) {
            doc.doc_id = id;
        }
        let fetched_at = match rec.fetched_at {
            Some(ts) => parse_timestamp(&ts).map_err(corpus_err)?,
            None => 0,
        };
        docs.push(doc.with_title(rec.title).with_fetched_at(fetched_at));
    }
    if docs.is_empty() {
        return Err(StoreError::EmptyCorpus(path.display().to_string()));
    }
    Ok(docs)
}
