use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::score::SparseScoreVector;
use super::tree::IsolationTree;
use crate::dataset::Dataset;
use crate::error::{AadError, Result};
use crate::rank::{mix_seed, rank_descending};
use crate::scalar::{normalize_in_place, Scalar};

/// Forest shape parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub subsample: usize,
    /// Optional height cap; `None` grows until isolation.
    pub max_depth: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            subsample: 256,
            max_depth: None,
        }
    }
}

impl ForestConfig {
    pub fn new(n_trees: usize, subsample: usize) -> Self {
        ForestConfig {
            n_trees,
            subsample,
            max_depth: None,
        }
    }
}

/// Isolation forest whose leaves are the members of a linear anomaly-score ensemble.
///
/// Leaves get global ids `0..m` in tree order. Each leaf carries a score
/// `d_i = -depth` and a weight `w_i`; the weight vector always has unit norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct EnsembleModel<S> {
    config: ForestConfig,
    dims: usize,
    trees: Vec<IsolationTree<S>>,
    created_at: Vec<usize>,
    leaf_offsets: Vec<usize>,
    leaf_scores: Vec<S>,
    weights: Vec<S>,
    feature_ranges: Vec<(S, S)>,
    generation: u64,
}

impl<S: Scalar> EnsembleModel<S> {
    /// Builds `config.n_trees` trees, each on an independent subsample drawn
    /// without replacement. Weights start at the uniform unit vector.
    pub fn build(data: &Dataset<S>, config: ForestConfig, seed: u64) -> Result<Self> {
        check_build_input(data, config.n_trees)?;
        let trees = grow_trees(data, config, seed, config.n_trees);
        let created_at = vec![0; trees.len()];
        let mut model = EnsembleModel {
            config,
            dims: data.dims(),
            trees,
            created_at,
            leaf_offsets: Vec::new(),
            leaf_scores: Vec::new(),
            weights: Vec::new(),
            feature_ranges: data.feature_ranges(),
            generation: 0,
        };
        model.rebuild_registry();
        model.weights = model.uniform_weights();
        Ok(model)
    }

    /// Assembles a model from hand-built trees with uniform weights.
    pub fn from_trees(trees: Vec<IsolationTree<S>>, config: ForestConfig) -> Result<Self> {
        let dims = trees.first().map(|t| t.dims()).ok_or(AadError::EmptyDataset)?;
        let mut ranges = vec![(S::infinity(), S::neg_infinity()); dims];
        for t in &trees {
            if t.dims() != dims {
                return Err(AadError::DimensionMismatch {
                    expected: dims,
                    actual: t.dims(),
                });
            }
            t.validate().map_err(AadError::Format)?;
            for (r, &(lo, hi)) in ranges.iter_mut().zip(t.sample_range()) {
                r.0 = r.0.min(lo);
                r.1 = r.1.max(hi);
            }
        }
        let mut model = EnsembleModel {
            config,
            dims,
            created_at: vec![0; trees.len()],
            trees,
            leaf_offsets: Vec::new(),
            leaf_scores: Vec::new(),
            weights: Vec::new(),
            feature_ranges: ranges,
            generation: 0,
        };
        model.rebuild_registry();
        model.weights = model.uniform_weights();
        Ok(model)
    }

    fn rebuild_registry(&mut self) {
        self.leaf_offsets.clear();
        self.leaf_scores.clear();
        let mut offset = 0;
        for tree in &self.trees {
            self.leaf_offsets.push(offset);
            for local in 0..tree.leaf_count() {
                self.leaf_scores.push(-S::of_usize(tree.leaf_depth(local)));
            }
            offset += tree.leaf_count();
        }
        self.leaf_offsets.push(offset);
    }

    pub fn config(&self) -> ForestConfig {
        self.config
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Total leaf count `m`.
    pub fn n_leaves(&self) -> usize {
        self.leaf_scores.len()
    }

    pub fn trees(&self) -> &[IsolationTree<S>] {
        &self.trees
    }

    pub fn tree(&self, t: usize) -> &IsolationTree<S> {
        &self.trees[t]
    }

    /// Window index at which each tree was built.
    pub fn created_at(&self) -> &[usize] {
        &self.created_at
    }

    /// Leaf scores `d`.
    pub fn leaf_scores(&self) -> &[S] {
        &self.leaf_scores
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    /// Incremented every time the leaf registry changes.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Per-feature range of all data the trees were built from.
    pub fn feature_ranges(&self) -> &[(S, S)] {
        &self.feature_ranges
    }

    /// Value of every entry of `w_unif`, `1/sqrt(m)`.
    pub fn uniform_weight(&self) -> S {
        S::one() / S::of_usize(self.n_leaves()).sqrt()
    }

    pub fn uniform_weights(&self) -> Vec<S> {
        vec![self.uniform_weight(); self.n_leaves()]
    }

    /// Replaces the weight vector; it is renormalized to unit length.
    pub fn set_weights(&mut self, mut w: Vec<S>) -> Result<()> {
        if w.len() != self.n_leaves() {
            return Err(AadError::DimensionMismatch {
                expected: self.n_leaves(),
                actual: w.len(),
            });
        }
        normalize_in_place(&mut w);
        self.weights = w;
        Ok(())
    }

    /// Model with the given weights (renormalized).
    pub fn with_weights(&self, w: Vec<S>) -> Result<Self> {
        let mut m = self.clone();
        m.set_weights(w)?;
        Ok(m)
    }

    pub fn leaf_offset(&self, tree: usize) -> usize {
        self.leaf_offsets[tree]
    }

    /// `(tree, local_id)` of a global leaf id.
    pub fn locate_leaf(&self, leaf_id: usize) -> Result<(usize, usize)> {
        if leaf_id >= self.n_leaves() {
            return Err(AadError::UnknownLeaf {
                leaf_id,
                leaf_count: self.n_leaves(),
            });
        }
        // offsets are sorted; the owner is the last tree starting at or before leaf_id
        let tree = self.leaf_offsets.partition_point(|&o| o <= leaf_id) - 1;
        Ok((tree, leaf_id - self.leaf_offsets[tree]))
    }

    /// Global leaf id reached by `x` in every tree, in tree order.
    pub fn leaves_of(&self, x: &[S]) -> Result<Vec<usize>> {
        self.check_dims(x)?;
        Ok(self
            .trees
            .iter()
            .zip(&self.leaf_offsets)
            .map(|(t, &off)| off + t.leaf_for(x))
            .collect())
    }

    fn check_dims(&self, x: &[S]) -> Result<()> {
        if x.len() != self.dims {
            return Err(AadError::DimensionMismatch {
                expected: self.dims,
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Ensemble score vector of `x`: `-depth` at the reached leaf of each tree.
    pub fn transform(&self, x: &[S], normalize: bool) -> Result<SparseScoreVector<S>> {
        let entries = self
            .leaves_of(x)?
            .into_iter()
            .map(|id| (id, self.leaf_scores[id]))
            .collect();
        Ok(SparseScoreVector::new(entries, normalize, self.generation))
    }

    pub fn transform_all(&self, points: &[Vec<S>], normalize: bool) -> Result<Vec<SparseScoreVector<S>>> {
        points.iter().map(|p| self.transform(p, normalize)).collect()
    }

    fn check_vector(&self, z: &SparseScoreVector<S>) -> Result<()> {
        if z.generation() != self.generation {
            return Err(AadError::StaleScoreVector {
                vector: z.generation(),
                model: self.generation,
            });
        }
        if let Some(id) = z.leaf_ids().find(|&id| id >= self.n_leaves()) {
            return Err(AadError::UnknownLeaf {
                leaf_id: id,
                leaf_count: self.n_leaves(),
            });
        }
        Ok(())
    }

    /// `w . z` under the model's current weights.
    pub fn score(&self, z: &SparseScoreVector<S>) -> Result<S> {
        self.score_with(z, &self.weights)
    }

    /// `w . z` under explicit weights of length `m`.
    pub fn score_with(&self, z: &SparseScoreVector<S>, w: &[S]) -> Result<S> {
        self.check_vector(z)?;
        if w.len() != self.n_leaves() {
            return Err(AadError::DimensionMismatch {
                expected: self.n_leaves(),
                actual: w.len(),
            });
        }
        Ok(z.score(w))
    }

    pub fn score_all(&self, zs: &[SparseScoreVector<S>]) -> Result<Vec<S>> {
        zs.iter().map(|z| self.score(z)).collect()
    }

    /// Instance indices by descending score; ties go to the lower index.
    pub fn rank_instances(&self, zs: &[SparseScoreVector<S>]) -> Result<Vec<usize>> {
        if zs.is_empty() {
            return Err(AadError::EmptyPopulation);
        }
        Ok(rank_descending(&self.score_all(zs)?))
    }

    /// Relevance `a_i = w_i * d_i` of every leaf.
    pub fn relevance(&self) -> Vec<S> {
        self.weights
            .iter()
            .zip(&self.leaf_scores)
            .map(|(&w, &d)| w * d)
            .collect()
    }

    /// Tree ids of the `count` oldest trees (lowest `created_at`, then lowest id).
    pub fn oldest_trees(&self, count: usize) -> BTreeSet<usize> {
        let mut ids: Vec<usize> = (0..self.n_trees()).collect();
        ids.sort_by_key(|&t| (self.created_at[t], t));
        ids.into_iter().take(count).collect()
    }

    /// Rebuilds the listed trees from `new_data`.
    ///
    /// Leaves of the replaced trees are dropped with their weights. Every new
    /// leaf starts at `1/sqrt(m')` where `m'` is the new leaf count, then the
    /// whole vector is rescaled to unit length, so surviving leaves keep their
    /// relative proportions.
    pub fn replace_trees(
        &self,
        tree_ids: &BTreeSet<usize>,
        new_data: &Dataset<S>,
        seed: u64,
        window: usize,
    ) -> Result<Self> {
        if tree_ids.is_empty() {
            return Ok(self.clone());
        }
        if let Some(&bad) = tree_ids.iter().find(|&&t| t >= self.n_trees()) {
            return Err(AadError::UnknownTree {
                tree_id: bad,
                tree_count: self.n_trees(),
            });
        }
        check_build_input(new_data, tree_ids.len())?;
        if new_data.dims() != self.dims {
            return Err(AadError::DimensionMismatch {
                expected: self.dims,
                actual: new_data.dims(),
            });
        }

        let mut fresh = grow_trees(new_data, self.config, seed, tree_ids.len()).into_iter();
        let mut trees = Vec::with_capacity(self.n_trees());
        let mut kept_weights: Vec<Option<&[S]>> = Vec::with_capacity(self.n_trees());
        let mut created_at = self.created_at.clone();
        for t in 0..self.n_trees() {
            if tree_ids.contains(&t) {
                trees.push(fresh.next().expect("one fresh tree per replaced id"));
                kept_weights.push(None);
                created_at[t] = window;
            } else {
                trees.push(self.trees[t].clone());
                let range = self.leaf_offsets[t]..self.leaf_offsets[t + 1];
                kept_weights.push(Some(&self.weights[range]));
            }
        }

        let m_new: usize = trees.iter().map(|t| t.leaf_count()).sum();
        let init = S::one() / S::of_usize(m_new).sqrt();
        let mut weights = Vec::with_capacity(m_new);
        for (tree, kept) in trees.iter().zip(&kept_weights) {
            match kept {
                Some(w) => weights.extend_from_slice(w),
                None => weights.extend(std::iter::repeat_n(init, tree.leaf_count())),
            }
        }
        normalize_in_place(&mut weights);

        let new_ranges = new_data.feature_ranges();
        let feature_ranges = self
            .feature_ranges
            .iter()
            .zip(&new_ranges)
            .map(|(&(a, b), &(c, d))| (a.min(c), b.max(d)))
            .collect();

        let mut model = EnsembleModel {
            config: self.config,
            dims: self.dims,
            trees,
            created_at,
            leaf_offsets: Vec::new(),
            leaf_scores: Vec::new(),
            weights,
            feature_ranges,
            generation: self.generation + 1,
        };
        model.rebuild_registry();
        Ok(model)
    }

    /// Checks the invariants a deserialized model must satisfy.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(AadError::Format(msg));
        if self.trees.is_empty() {
            return fail("model has no trees".into());
        }
        if self.created_at.len() != self.trees.len() {
            return fail("created_at length differs from tree count".into());
        }
        let mut rebuilt = self.clone();
        rebuilt.rebuild_registry();
        if rebuilt.leaf_offsets != self.leaf_offsets || rebuilt.leaf_scores != self.leaf_scores {
            return fail("leaf registry is inconsistent with the trees".into());
        }
        if self.weights.len() != self.n_leaves() {
            return fail("weight vector length differs from leaf count".into());
        }
        for t in &self.trees {
            if t.dims() != self.dims {
                return fail("tree dimensionality differs from model".into());
            }
            t.validate().map_err(AadError::Format)?;
        }
        Ok(())
    }
}

fn check_build_input<S: Scalar>(data: &Dataset<S>, n_trees: usize) -> Result<()> {
    if data.is_empty() {
        return Err(AadError::EmptyDataset);
    }
    if data.dims() == 0 {
        return Err(AadError::ZeroDimensions);
    }
    if n_trees == 0 {
        return Err(AadError::invalid("n_trees", "must be at least 1"));
    }
    Ok(())
}

fn grow_trees<S: Scalar>(data: &Dataset<S>, config: ForestConfig, seed: u64, count: usize) -> Vec<IsolationTree<S>> {
    let n = data.len();
    let size = config.subsample.clamp(1, n);
    (0..count)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
            let sample: Vec<&[S]> = if size >= n {
                data.points().iter().map(Vec::as_slice).collect()
            } else {
                rand::seq::index::sample(&mut rng, n, size)
                    .into_iter()
                    .map(|i| data.point(i))
                    .collect()
            };
            IsolationTree::grow(&sample, config.max_depth, &mut rng)
        })
        .collect()
}
