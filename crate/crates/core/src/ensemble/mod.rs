//! Isolation-forest leaf ensemble.
//!
//! Every leaf of every tree is one ensemble member. An instance activates one
//! leaf per tree, so its score vector has exactly `T` non-zero slots out of `m`.

mod forest;
mod io;
mod score;
mod tree;

pub use forest::{EnsembleModel, ForestConfig};
pub use io::{load_model, save_model, ModelFile, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use score::SparseScoreVector;
pub use tree::{IsolationTree, Node};

use crate::dataset::Dataset;
use crate::description::Subspace;
use crate::error::Result;
use crate::scalar::Scalar;

pub fn build_forest<S: Scalar>(
    data: &Dataset<S>,
    n_trees: usize,
    subsample: usize,
    seed: u64,
) -> Result<EnsembleModel<S>> {
    EnsembleModel::build(data, ForestConfig::new(n_trees, subsample), seed)
}

/// Region, clipped bounds, volume and relevance of one leaf.
pub fn leaf_subspace<S: Scalar>(model: &EnsembleModel<S>, leaf_id: usize) -> Result<Subspace<S>> {
    Subspace::of_leaf(model, leaf_id)
}
