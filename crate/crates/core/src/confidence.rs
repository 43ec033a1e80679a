//! Row-stochastic confidence matrices.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// `n x c` matrix whose rows are probability vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMatrix {
    n: usize,
    c: usize,
    p: Vec<f64>,
}

impl ConfidenceMatrix {
    /// Wraps probabilities, rejecting entries outside `[0, 1]` and rows whose
    /// sum is off by more than 1e-6.
    pub fn new(c: usize, p: Vec<f64>) -> Result<Self> {
        if c == 0 || !p.len().is_multiple_of(c) {
            return Err(Error::shape("confidence values do not form whole rows"));
        }
        let n = p.len() / c;
        for (row, chunk) in p.chunks_exact(c).enumerate() {
            if chunk.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
                return Err(Error::NotStochastic {
                    row,
                    reason: "entry outside [0, 1]",
                });
            }
            let sum: f64 = chunk.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::NotStochastic {
                    row,
                    reason: "row does not sum to 1",
                });
            }
        }
        Ok(Self { n, c, p })
    }

    /// Applies the softmax to each row of an `n x c` logit matrix.
    pub fn from_logits(c: usize, logits: &[f64]) -> Result<Self> {
        if c == 0 || !logits.len().is_multiple_of(c) {
            return Err(Error::shape("logit values do not form whole rows"));
        }
        let mut p = Vec::with_capacity(logits.len());
        let mut buf = Vec::with_capacity(c);
        for row in logits.chunks_exact(c) {
            math::softmax_into(row, &mut buf)?;
            p.extend_from_slice(&buf);
        }
        Ok(Self {
            n: logits.len() / c,
            c,
            p,
        })
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn classes(&self) -> usize {
        self.c
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, c: usize) -> f64 {
        self.p[i * self.c + c]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.p[i * self.c..(i + 1) * self.c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    /// Confidence of class `c` across all instances.
    pub fn column(&self, c: usize) -> impl Iterator<Item = f64> + '_ {
        self.p.iter().skip(c).step_by(self.c).copied()
    }

    /// Per-instance maximum confidence.
    pub fn row_max(&self) -> Vec<f64> {
        self.p
            .chunks_exact(self.c)
            .map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    /// Hard predictions (lowest index on ties).
    pub fn argmax(&self) -> Vec<usize> {
        self.p.chunks_exact(self.c).map(math::argmax).collect()
    }

    /// Rows restricted to the given instances, in order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut p = Vec::with_capacity(indices.len() * self.c);
        for &i in indices {
            p.extend_from_slice(self.row(i));
        }
        Self {
            n: indices.len(),
            c: self.c,
            p,
        }
    }
}
