//! Exact cosine scoring over a row-major matrix of unit vectors.

use alloc::vec::Vec;

use crate::error::IndexError;

/// L2-normalize in place (computed in f64). Returns `false` for zero or
/// non-finite vectors, which are left untouched.
pub fn normalize(v: &mut [f32]) -> bool {
    let norm = libm::sqrt(v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>());
    if norm == 0.0 || !norm.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x = (f64::from(*x) / norm) as f32;
    }
    true
}

pub fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum()
}

pub fn l2_norm(v: &[f32]) -> f64 {
    libm::sqrt(dot(v, v))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseIndex {
    dimension: usize,
    data: Vec<f32>,
}

impl DenseIndex {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            data: Vec::new(),
        }
    }

    /// Rebuild from a flat row-major matrix.
    pub fn from_matrix(dimension: usize, data: Vec<f32>) -> Result<Self, IndexError> {
        if dimension == 0 && !data.is_empty() || dimension != 0 && !data.len().is_multiple_of(dimension) {
            return Err(IndexError::Corrupt(
                "matrix length is not a multiple of the dimension".into(),
            ));
        }
        Ok(Self { dimension, data })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dimension).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn matrix(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, row: usize) -> Option<&[f32]> {
        let start = row.checked_mul(self.dimension)?;
        self.data.get(start..start + self.dimension)
    }

    /// Append a row, normalizing it unless it is already a unit vector. The
    /// first row fixes the dimension of an index created with dimension 0.
    pub fn push(&mut self, mut v: Vec<f32>, id: &str) -> Result<u32, IndexError> {
        if self.dimension == 0 && self.data.is_empty() {
            self.dimension = v.len();
        }
        if v.len() != self.dimension || v.is_empty() {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                actual: v.len(),
            });
        }
        let norm = l2_norm(&v);
        if norm == 0.0 || !norm.is_finite() {
            return Err(IndexError::ZeroVector(id.into()));
        }
        // rows that are already unit length are stored bit-for-bit
        if (norm - 1.0).abs() > 1e-6 {
            normalize(&mut v);
        }
        let row = self.len() as u32;
        self.data.extend_from_slice(&v);
        Ok(row)
    }

    pub fn check_query(&self, q: &[f32]) -> Result<(), IndexError> {
        if q.len() != self.dimension {
            return Err(IndexError::DimensionMismatch {
                expected: self.dimension,
                actual: q.len(),
            });
        }
        Ok(())
    }

    pub fn score(&self, q: &[f32], row: usize) -> Option<f64> {
        self.row(row).map(|r| dot(q, r))
    }

    pub fn score_all(&self, q: &[f32]) -> Vec<f64> {
        if self.dimension == 0 {
            return Vec::new();
        }
        self.data.chunks_exact(self.dimension).map(|r| dot(q, r)).collect()
    }
}
