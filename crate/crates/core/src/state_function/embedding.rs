use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Delay embedding `y_k = [x_k; x_{k−s}; …; x_{k−(p−1)s}]`, newest first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    /// Number of states in the window (`p`).
    pub lookback: usize,
    /// Spacing between them in samples (`s`).
    pub stride: usize,
    /// State dimension (`d`).
    pub dim: usize,
}

impl EmbeddingSpec {
    pub fn new(lookback: usize, stride: usize, dim: usize) -> Result<Self> {
        if lookback == 0 || stride == 0 || dim == 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "lookback, stride and dimension must be positive (got p={lookback}, s={stride}, d={dim})"
            )));
        }
        Ok(EmbeddingSpec { lookback, stride, dim })
    }

    /// `p d`.
    pub fn len(&self) -> usize {
        self.lookback * self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples of history needed before the newest point, `(p − 1) s`.
    pub fn history(&self) -> usize {
        (self.lookback - 1) * self.stride
    }
}

/// Embedding of row `k` of a flat row-major point sequence.
pub fn build_embedding(points: &[f64], k: usize, spec: &EmbeddingSpec) -> Result<Vec<f64>> {
    if points.len() % spec.dim != 0 {
        return Err(Error::InvalidArgument(alloc::format!(
            "{} values do not form rows of width {}",
            points.len(),
            spec.dim
        )));
    }
    let rows = points.len() / spec.dim;
    if k >= rows {
        return Err(Error::IndexRange(alloc::format!("row {k} of a {rows}-row sequence")));
    }
    if k < spec.history() {
        return Err(Error::InsufficientHistory {
            index: k,
            required: spec.history(),
            available: k,
        });
    }
    let mut out = vec![0.0; spec.len()];
    build_embedding_into(points, k, spec, &mut out);
    Ok(out)
}

/// Unchecked variant for hot loops.
#[inline]
pub fn build_embedding_into(points: &[f64], k: usize, spec: &EmbeddingSpec, out: &mut [f64]) {
    let d = spec.dim;
    for (lag, chunk) in out.chunks_exact_mut(d).enumerate() {
        let row = k - lag * spec.stride;
        chunk.copy_from_slice(&points[row * d..(row + 1) * d]);
    }
}
