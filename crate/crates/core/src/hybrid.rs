//! Gist-memory hybrid index: BM25 over raw text fused with cosine similarity
//! over gist embeddings.
//!
//! Fusion happens over a candidate pool (the union of the top-`pool_size`
//! dense and top-`pool_size` sparse rows). Each component is min–max
//! normalized over the pool before the weighted sum
//! `alpha * dense + (1 - alpha) * sparse`; a component that is constant over
//! the pool normalizes to 0.5 for every member. Ties are broken by ascending
//! document id.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dense::DenseIndex;
use crate::error::IndexError;
use crate::sparse::{Bm25Params, SparseIndex};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_POOL_SIZE: usize = 50;
pub const DEFAULT_TOP_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub doc_id: String,
    pub fused_score: f64,
    pub dense_component: f64,
    pub sparse_component: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Retrieval {
    pub alpha: f64,
    pub hits: Vec<RankedHit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridIndex {
    doc_ids: Vec<String>,
    rows: BTreeMap<String, u32>,
    sparse: SparseIndex,
    dense: DenseIndex,
    pool_size: usize,
}

/// One document as seen by the index builder.
pub struct IndexEntry<'a> {
    pub doc_id: &'a str,
    pub raw_text: &'a str,
    pub embedding: &'a [f32],
}

impl HybridIndex {
    pub fn build<'a>(
        entries: impl IntoIterator<Item = IndexEntry<'a>>,
        params: Bm25Params,
        pool_size: usize,
    ) -> Result<Self, IndexError> {
        let mut index = Self {
            doc_ids: Vec::new(),
            rows: BTreeMap::new(),
            sparse: SparseIndex::new(params),
            dense: DenseIndex::new(0),
            pool_size,
        };
        for e in entries {
            if index.rows.contains_key(e.doc_id) {
                return Err(IndexError::DuplicateDocument(e.doc_id.into()));
            }
            let row = index.dense.push(e.embedding.to_vec(), e.doc_id)?;
            index.sparse.add_document(e.raw_text);
            index.rows.insert(e.doc_id.into(), row);
            index.doc_ids.push(e.doc_id.into());
        }
        Ok(index)
    }

    /// Reassemble a persisted index. `dense` rows must already be unit
    /// vectors and line up with `doc_ids`.
    pub fn from_parts(
        doc_ids: Vec<String>,
        sparse: SparseIndex,
        dense: DenseIndex,
        pool_size: usize,
    ) -> Result<Self, IndexError> {
        if sparse.doc_count() != doc_ids.len() || dense.len() != doc_ids.len() {
            return Err(IndexError::Corrupt("row counts disagree".into()));
        }
        let mut rows = BTreeMap::new();
        for (i, id) in doc_ids.iter().enumerate() {
            if rows.insert(id.clone(), i as u32).is_some() {
                return Err(IndexError::DuplicateDocument(id.clone()));
            }
        }
        Ok(Self {
            doc_ids,
            rows,
            sparse,
            dense,
            pool_size,
        })
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn sparse(&self) -> &SparseIndex {
        &self.sparse
    }

    pub fn dense(&self) -> &DenseIndex {
        &self.dense
    }

    pub fn dimension(&self) -> usize {
        self.dense.dimension()
    }

    pub fn pool_size(&self) -> usize {
        self.pool_size
    }

    fn row(&self, doc_id: &str) -> Result<usize, IndexError> {
        self.rows
            .get(doc_id)
            .map(|&r| r as usize)
            .ok_or_else(|| IndexError::UnknownDocument(doc_id.into()))
    }

    pub fn sparse_score(&self, query: &str, doc_id: &str) -> Result<f64, IndexError> {
        let row = self.row(doc_id)?;
        Ok(self.sparse.score(query, row).unwrap_or(0.0))
    }

    pub fn dense_score(&self, q_vec: &[f32], doc_id: &str) -> Result<f64, IndexError> {
        let row = self.row(doc_id)?;
        self.dense.check_query(q_vec)?;
        Ok(self.dense.score(q_vec, row).unwrap_or(0.0))
    }

    /// Top-`k` documents by fused relevance.
    pub fn retrieve(&self, query: &str, q_vec: &[f32], alpha: f64, k: usize) -> Result<Retrieval, IndexError> {
        let alpha = alpha.clamp(0.0, 1.0);
        if self.is_empty() || k == 0 {
            return Ok(Retrieval {
                alpha,
                hits: Vec::new(),
            });
        }
        self.dense.check_query(q_vec)?;
        let dense = self.dense.score_all(q_vec);
        let sparse = self.sparse.score_all(query);

        let mut pool: BTreeSet<usize> = BTreeSet::new();
        pool.extend(self.top_rows(&dense, self.pool_size));
        pool.extend(self.top_rows(&sparse, self.pool_size));
        let pool: Vec<usize> = pool.into_iter().collect();

        let dense_norm = min_max(pool.iter().map(|&r| dense[r]));
        let sparse_norm = min_max(pool.iter().map(|&r| sparse[r]));

        let mut hits: Vec<RankedHit> = pool
            .iter()
            .map(|&r| {
                let d = dense_norm.apply(dense[r]);
                let s = sparse_norm.apply(sparse[r]);
                RankedHit {
                    doc_id: self.doc_ids[r].clone(),
                    fused_score: fuse(alpha, d, s),
                    dense_component: d,
                    sparse_component: s,
                }
            })
            .collect();
        hits.sort_by(|a, b| by_score_then_id(a.fused_score, &a.doc_id, b.fused_score, &b.doc_id));
        hits.truncate(k);
        Ok(Retrieval { alpha, hits })
    }

    fn top_rows(&self, scores: &[f64], n: usize) -> Vec<usize> {
        let mut rows: Vec<usize> = (0..scores.len()).collect();
        let cmp = |a: &usize, b: &usize| by_score_then_id(scores[*a], &self.doc_ids[*a], scores[*b], &self.doc_ids[*b]);
        if n < rows.len() {
            if n == 0 {
                return Vec::new();
            }
            rows.select_nth_unstable_by(n - 1, cmp);
            rows.truncate(n);
        }
        rows.sort_by(cmp);
        rows
    }
}

/// Weighted fusion of two normalized components.
pub fn fuse(alpha: f64, dense: f64, sparse: f64) -> f64 {
    (alpha * dense + (1.0 - alpha) * sparse).clamp(0.0, 1.0)
}

/// Descending score, then ascending id.
pub fn by_score_then_id(sa: f64, ida: &str, sb: f64, idb: &str) -> Ordering {
    sb.total_cmp(&sa).then_with(|| ida.cmp(idb))
}

/// Min–max normalizer fitted over a set of scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    pub fn apply(&self, x: f64) -> f64 {
        if self.max > self.min {
            ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

pub fn min_max(values: impl IntoIterator<Item = f64>) -> MinMax {
    let mut mm = MinMax {
        min: f64::INFINITY,
        max: f64::NEG_INFINITY,
    };
    for v in values {
        mm.min = mm.min.min(v);
        mm.max = mm.max.max(v);
    }
    mm
}
