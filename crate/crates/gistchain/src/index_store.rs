//! Building the hybrid index from a corpus store, and its on-disk form.
//!
//! The index lives in the same directory as the store and reuses the
//! store's `embeddings.f32` as its dense matrix. It adds
//!
//! - `index.json`: format tag, version, `d`, `k1`, `b`, `doc_count`,
//!   `pool_size` and checksums of `postings.jsonl` and `embeddings.f32`;
//! - `postings.jsonl`: a header line `{"doc_ids": [...], "doc_lengths": [...]}`
//!   followed by one `{"term": t, "postings": [[row, tf], ...]}` line per
//!   term in ascending byte order of the term, postings ascending by row.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use gistchain_core::dense::DenseIndex;
use gistchain_core::sparse::Posting;
use gistchain_core::{Bm25Params, HybridIndex, IndexEntry, IndexError, SparseIndex};

use crate::checksum;
use crate::store::{read, write, CorpusStore, StoreError, EMBEDDINGS_FILE};

pub const INDEX_FORMAT: &str = "gistchain-index";
pub const INDEX_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "index.json";
pub const POSTINGS_FILE: &str = "postings.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum IndexStoreError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("document {0} has no embedded gist")]
    MissingGist(String),
}

/// Sparse index over raw text and dense index over the stored gist
/// embeddings, in store order.
pub fn build_index(store: &CorpusStore, params: Bm25Params, pool_size: usize) -> Result<HybridIndex, IndexStoreError> {
    let mut entries = Vec::with_capacity(store.len());
    for (doc, gist) in store.entries() {
        let gist = gist
            .filter(|g| g.is_embedded())
            .ok_or_else(|| IndexStoreError::MissingGist(doc.doc_id.clone()))?;
        entries.push(IndexEntry {
            doc_id: &doc.doc_id,
            raw_text: &doc.raw_text,
            embedding: &gist.embedding,
        });
    }
    Ok(HybridIndex::build(entries, params, pool_size)?)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexManifest {
    format: String,
    version: u32,
    d: usize,
    k1: f64,
    b: f64,
    doc_count: usize,
    pool_size: usize,
    checksums: IndexChecksums,
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexChecksums {
    postings: String,
    embeddings: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PostingsHeader {
    doc_ids: Vec<String>,
    doc_lengths: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermLine {
    term: String,
    postings: Vec<(u32, u32)>,
}

/// Serialized postings file; deterministic for a given index.
pub fn postings_bytes(index: &HybridIndex) -> Vec<u8> {
    let mut out = serde_json::to_string(&PostingsHeader {
        doc_ids: index.doc_ids().to_vec(),
        doc_lengths: index.sparse().doc_lengths().to_vec(),
    })
    .expect("header serializes");
    out.push('\n');
    for (term, list) in index.sparse().postings() {
        let line = TermLine {
            term: term.clone(),
            postings: list.iter().map(|p| (p.row, p.tf)).collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("term serializes"));
        out.push('\n');
    }
    out.into_bytes()
}

fn matrix_bytes(index: &HybridIndex) -> Vec<u8> {
    index.dense().matrix().iter().flat_map(|x| x.to_le_bytes()).collect()
}

/// Write `index.json` and `postings.jsonl`. The dense matrix is written to
/// `embeddings.f32` only when that file is absent (it is normally the
/// store's own file); an existing file must match the index bit-for-bit.
pub fn persist_index(index: &HybridIndex, dir: &Path) -> Result<(), IndexStoreError> {
    std::fs::create_dir_all(dir).map_err(crate::store::io_err(dir))?;
    let postings = postings_bytes(index);
    let matrix = matrix_bytes(index);
    let emb_path = dir.join(EMBEDDINGS_FILE);
    if emb_path.exists() {
        if read(&emb_path)? != matrix {
            return Err(IndexError::Corrupt("existing embeddings file does not match the index".into()).into());
        }
    } else {
        write(&emb_path, &matrix)?;
    }
    let params = index.sparse().params();
    let manifest = IndexManifest {
        format: INDEX_FORMAT.into(),
        version: INDEX_VERSION,
        d: index.dimension(),
        k1: params.k1,
        b: params.b,
        doc_count: index.len(),
        pool_size: index.pool_size(),
        checksums: IndexChecksums {
            postings: checksum(&postings),
            embeddings: checksum(&matrix),
        },
    };
    write(&dir.join(POSTINGS_FILE), &postings)?;
    let mut m = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    m.push('\n');
    write(&dir.join(INDEX_FILE), m.as_bytes())?;
    Ok(())
}

pub fn load_index(dir: &Path) -> Result<HybridIndex, IndexStoreError> {
    let raw = read(&dir.join(INDEX_FILE))?;
    let manifest: IndexManifest =
        serde_json::from_slice(&raw).map_err(|e| StoreError::Malformed(format!("{INDEX_FILE}: {e}")))?;
    if manifest.format != INDEX_FORMAT || manifest.version != INDEX_VERSION {
        return Err(StoreError::SchemaVersionMismatch {
            found: manifest.format,
            version: manifest.version,
        }
        .into());
    }
    let postings_raw = read(&dir.join(POSTINGS_FILE))?;
    if checksum(&postings_raw) != manifest.checksums.postings {
        return Err(StoreError::ChecksumMismatch(POSTINGS_FILE.into()).into());
    }
    let emb_raw = read(&dir.join(EMBEDDINGS_FILE))?;
    if checksum(&emb_raw) != manifest.checksums.embeddings {
        return Err(StoreError::ChecksumMismatch(EMBEDDINGS_FILE.into()).into());
    }
    let text = String::from_utf8(postings_raw).map_err(|e| StoreError::Malformed(e.to_string()))?;
    let mut lines = text.lines();
    let header: PostingsHeader = lines
        .next()
        .ok_or_else(|| StoreError::Malformed("postings header missing".into()))
        .and_then(|l| serde_json::from_str(l).map_err(|e| StoreError::Malformed(e.to_string())))?;
    let mut postings = BTreeMap::new();
    for line in lines {
        let t: TermLine = serde_json::from_str(line).map_err(|e| StoreError::Malformed(e.to_string()))?;
        let list = t.postings.into_iter().map(|(row, tf)| Posting { row, tf }).collect();
        if postings.insert(t.term, list).is_some() {
            return Err(StoreError::Malformed("duplicate term in postings".into()).into());
        }
    }
    let params = Bm25Params {
        k1: manifest.k1,
        b: manifest.b,
    };
    let sparse = SparseIndex::from_parts(params, postings, header.doc_lengths)
        .ok_or_else(|| IndexError::Corrupt("postings reference unknown rows".into()))?;
    let floats: Vec<f32> = emb_raw
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
        .collect();
    let dense = DenseIndex::from_matrix(manifest.d, floats)?;
    if header.doc_ids.len() != manifest.doc_count {
        return Err(IndexError::Corrupt("doc_count disagrees with postings header".into()).into());
    }
    Ok(HybridIndex::from_parts(
        header.doc_ids,
        sparse,
        dense,
        manifest.pool_size,
    )?)
}
