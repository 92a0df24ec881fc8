//! Windowed streaming: leaf-distribution drift detection, tree replacement
//! and bounded-memory active learning.

mod drift;
mod session;

pub use drift::{
    default_eps, detect_drift, ensemble_distribution, kl_divergence, kl_threshold, nearest_rank_quantile,
    pooled_half_split_kl, tree_distribution, update_model, DriftCheck, DriftState, LeafDistribution, ModelUpdate,
    UpdateMode,
};
pub use session::{merge_and_retain, stream_active_learn, StreamConfig, StreamOutcome, WindowBuffer};
