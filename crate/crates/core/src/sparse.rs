//! Okapi BM25 over an in-memory inverted index.
//!
//! Documents are addressed by dense row numbers; [`crate::hybrid`] maps rows
//! to document ids. Query scores are summed over query tokens as they occur,
//! so a repeated query term counts twice.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::text;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posting {
    pub row: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseIndex {
    params: Bm25Params,
    /// Postings per term, each list sorted by row.
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
}

impl SparseIndex {
    pub fn new(params: Bm25Params) -> Self {
        Self {
            params,
            ..Self::default()
        }
    }

    /// Rebuild from persisted parts. Postings must reference valid rows.
    pub fn from_parts(
        params: Bm25Params,
        postings: BTreeMap<String, Vec<Posting>>,
        doc_lengths: Vec<u32>,
    ) -> Option<Self> {
        let n = doc_lengths.len() as u32;
        let valid = postings
            .values()
            .all(|list| list.windows(2).all(|w| w[0].row < w[1].row) && list.iter().all(|p| p.row < n && p.tf > 0));
        if !valid {
            return None;
        }
        let avg_doc_length = mean(&doc_lengths);
        Some(Self {
            params,
            postings,
            doc_lengths,
            avg_doc_length,
        })
    }

    /// Append a document; returns its row.
    pub fn add_document(&mut self, raw_text: &str) -> u32 {
        let row = self.doc_lengths.len() as u32;
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        let mut length = 0u32;
        for tok in text::tokenize(raw_text) {
            *counts.entry(tok).or_default() += 1;
            length += 1;
        }
        for (term, tf) in counts {
            self.postings.entry(term).or_default().push(Posting { row, tf });
        }
        self.doc_lengths.push(length);
        self.avg_doc_length = mean(&self.doc_lengths);
        row
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn doc_count(&self) -> usize {
        self.doc_lengths.len()
    }

    pub fn doc_lengths(&self) -> &[u32] {
        &self.doc_lengths
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn postings(&self) -> &BTreeMap<String, Vec<Posting>> {
        &self.postings
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    /// Robertson IDF, floored at zero.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.document_frequency(term) as f64;
        libm::log((n - df + 0.5) / (df + 0.5)).max(0.0)
    }

    fn term_weight(&self, idf: f64, tf: u32, row: usize) -> f64 {
        let tf = f64::from(tf);
        let Bm25Params { k1, b } = self.params;
        let dl = f64::from(self.doc_lengths[row]);
        let norm = if self.avg_doc_length > 0.0 {
            1.0 - b + b * dl / self.avg_doc_length
        } else {
            1.0
        };
        idf * tf * (k1 + 1.0) / (tf + k1 * norm)
    }

    /// BM25 score of one row. Rows out of range score `None`.
    pub fn score(&self, query: &str, row: usize) -> Option<f64> {
        if row >= self.doc_count() {
            return None;
        }
        let mut total = 0.0;
        for term in text::tokenize(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            if let Ok(pos) = list.binary_search_by_key(&(row as u32), |p| p.row) {
                total += self.term_weight(self.idf(&term), list[pos].tf, row);
            }
        }
        Some(total)
    }

    /// BM25 scores for every row, accumulated in the same order as
    /// [`Self::score`] so both agree bitwise.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_count()];
        for term in text::tokenize(query) {
            let Some(list) = self.postings.get(&term) else {
                continue;
            };
            let idf = self.idf(&term);
            for p in list {
                scores[p.row as usize] += self.term_weight(idf, p.tf, p.row as usize);
            }
        }
        scores
    }
}

fn mean(lengths: &[u32]) -> f64 {
    if lengths.is_empty() {
        return 0.0;
    }
    lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / lengths.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> SparseIndex {
        let mut idx = SparseIndex::new(Bm25Params::default());
        for t in ["the cat sat", "the dog ran", "cats and dogs"] {
            idx.add_document(t);
        }
        idx
    }

    #[test]
    fn hand_built_inverted_index() {
        let idx = fixture();
        assert_eq!(idx.doc_lengths(), &[3, 3, 3]);
        assert!((idx.avg_doc_length() - 3.0).abs() < 1e-12);
        let the = &idx.postings()["the"];
        assert_eq!(the, &[Posting { row: 0, tf: 1 }, Posting { row: 1, tf: 1 }]);
        assert_eq!(idx.postings()["cats"], [Posting { row: 2, tf: 1 }]);
        assert_eq!(idx.postings().len(), 8);
    }

    #[test]
    fn negative_idf_is_floored() {
        let idx = fixture();
        // "the" appears in 2 of 3 documents: ln(1.5 / 2.5) < 0
        assert_eq!(idx.idf("the"), 0.0);
        assert_eq!(idx.score("the", 0), Some(0.0));
    }

    #[test]
    fn missing_terms_and_empty_query() {
        let idx = fixture();
        assert_eq!(idx.score("", 0), Some(0.0));
        assert_eq!(idx.score("zebra", 1), Some(0.0));
        assert_eq!(idx.score("cat", 1), Some(0.0));
        assert_eq!(idx.score("cat", 3), None);
    }

    #[test]
    fn empty_index_scores_nothing() {
        let idx = SparseIndex::new(Bm25Params::default());
        assert!(idx.score_all("anything").is_empty());
    }

    #[test]
    fn score_all_matches_pointwise() {
        let idx = fixture();
        for q in ["cat", "the dog", "dogs cats and", "ran ran"] {
            let all = idx.score_all(q);
            for (row, s) in all.iter().enumerate() {
                assert_eq!(idx.score(q, row).unwrap().to_bits(), s.to_bits());
            }
        }
    }
}
