use serde::{Deserialize, Serialize};

use crate::scalar::{exact_sum, Scalar};

/// Per-instance ensemble output: one `(leaf_id, value)` entry per tree.
///
/// The vector remembers the model generation that produced it so that scoring
/// against a model whose leaf registry has since been rebuilt is rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SparseScoreVector<S> {
    entries: Vec<(usize, S)>,
    normalized: bool,
    generation: u64,
}

impl<S: Scalar> SparseScoreVector<S> {
    pub fn new(entries: Vec<(usize, S)>, normalized: bool, generation: u64) -> Self {
        let mut z = SparseScoreVector {
            entries,
            normalized: false,
            generation,
        };
        if normalized {
            z.normalize();
        }
        z
    }

    pub fn entries(&self) -> &[(usize, S)] {
        &self.entries
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn leaf_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.entries.iter().map(|&(id, _)| id)
    }

    pub fn norm(&self) -> S {
        self.entries.iter().map(|&(_, v)| v * v).sum::<S>().sqrt()
    }

    pub fn sum(&self) -> S {
        self.entries.iter().map(|&(_, v)| v).sum()
    }

    /// Scales to unit L2 norm; a zero vector stays zero.
    pub fn normalize(&mut self) {
        let norm = self.norm();
        if norm > S::zero() {
            for e in &mut self.entries {
                e.1 = e.1 / norm;
            }
        }
        self.normalized = true;
    }

    /// Sparse dot product with a dense weight vector. Ids must be in range.
    #[inline]
    pub fn dot(&self, w: &[S]) -> S {
        self.entries.iter().map(|&(id, v)| w[id] * v).sum()
    }

    /// Correctly rounded `w . z`: every product is split into its rounded
    /// value and exact error, and the terms are summed exactly. Instances
    /// whose exact scores tie therefore get bit-equal scores, and rankings
    /// fall back to the index tie-break. Used wherever instances are ranked.
    pub fn score(&self, w: &[S]) -> S {
        exact_sum(self.entries.iter().flat_map(|&(id, v)| {
            let p = w[id] * v;
            [p, w[id].mul_add(v, -p)]
        }))
    }

    /// `dst += scale * z`.
    #[inline]
    pub fn add_scaled_to(&self, dst: &mut [S], scale: S) {
        for &(id, v) in &self.entries {
            dst[id] = dst[id] + scale * v;
        }
    }

    /// Length-`m` dense expansion.
    pub fn to_dense(&self, m: usize) -> Vec<S> {
        let mut out = vec![S::zero(); m];
        for &(id, v) in &self.entries {
            out[id] = out[id] + v;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalized_has_unit_norm() {
        let z = SparseScoreVector::new(vec![(0, -3.0f64), (4, -4.0)], true, 0);
        assert!((z.norm() - 1.0).abs() < 1e-12);
        assert!(z.is_normalized());
    }

    #[test]
    fn zero_stays_zero() {
        let z = SparseScoreVector::new(vec![(0, 0.0f64), (1, 0.0)], true, 0);
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn dense_expansion_dot_agrees() {
        let z = SparseScoreVector::new(vec![(1, -2.0f64), (3, -1.0)], false, 0);
        let w = vec![0.5, 0.25, 0.125, 2.0];
        let dense = z.to_dense(4);
        assert_eq!(z.dot(&w), crate::scalar::dot(&dense, &w));
    }
}
