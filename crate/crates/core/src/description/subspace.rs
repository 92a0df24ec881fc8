use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleModel;
use crate::error::Result;
use crate::scalar::Scalar;

/// Smallest volume a subspace may report.
pub const MIN_VOLUME: f64 = 1e-12;

/// Hyper-rectangle covered by one leaf.
///
/// `region` is the exact half-open cell (`lo <= x < hi`, infinite where the
/// path never constrained a feature) and decides membership. `bounds` is the
/// same cell clipped to the owning tree's sample range, in original units.
/// `normalized` maps `bounds` into the model's per-feature `[0, 1]` frame and
/// gives the volume used as the covering cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Subspace<S> {
    pub leaf_id: usize,
    pub tree: usize,
    pub region: Vec<(S, S)>,
    pub bounds: Vec<(S, S)>,
    pub normalized: Vec<(S, S)>,
    pub cost: S,
    pub relevance: S,
}

impl<S: Scalar> Subspace<S> {
    pub fn of_leaf(model: &EnsembleModel<S>, leaf_id: usize) -> Result<Self> {
        let (tree_id, local) = model.locate_leaf(leaf_id)?;
        let tree = model.tree(tree_id);
        let region = tree.leaf_region(local);
        let bounds: Vec<(S, S)> = region
            .iter()
            .zip(tree.sample_range())
            .map(|(&(lo, hi), &(smin, smax))| (lo.max(smin), hi.min(smax)))
            .collect();
        let normalized: Vec<(S, S)> = bounds
            .iter()
            .zip(model.feature_ranges())
            .map(|(&(lo, hi), &(fmin, fmax))| normalize_side(lo, hi, fmin, fmax))
            .collect();
        let volume = normalized
            .iter()
            .map(|&(lo, hi)| hi - lo)
            .fold(S::one(), |acc, side| acc * side);
        let cost = volume.max(S::of(MIN_VOLUME)).min(S::one());
        Ok(Subspace {
            leaf_id,
            tree: tree_id,
            region,
            bounds,
            normalized,
            cost,
            relevance: model.weights()[leaf_id] * model.leaf_scores()[leaf_id],
        })
    }

    /// Whether `x` falls inside the leaf's cell.
    pub fn contains(&self, x: &[S]) -> bool {
        self.region.iter().zip(x).all(|(&(lo, hi), &v)| lo <= v && v < hi)
    }

    /// Refreshes the relevance after the model weights changed.
    pub fn refresh_relevance(&mut self, model: &EnsembleModel<S>) {
        self.relevance = model.weights()[self.leaf_id] * model.leaf_scores()[self.leaf_id];
    }
}

fn normalize_side<S: Scalar>(lo: S, hi: S, fmin: S, fmax: S) -> (S, S) {
    let width = fmax - fmin;
    if !(width > S::zero()) {
        return (S::zero(), S::one());
    }
    let clamp = |v: S| v.max(S::zero()).min(S::one());
    let a = clamp((lo - fmin) / width);
    let b = clamp((hi - fmin) / width);
    (a, b.max(a))
}

/// Maps a normalized coordinate back to original units.
pub fn denormalize<S: Scalar>(v: S, range: (S, S)) -> S {
    range.0 + v * (range.1 - range.0)
}
