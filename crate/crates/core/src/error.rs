use thiserror::Error;

pub type Result<T, E = AadError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum AadError {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("points have zero feature dimensions")]
    ZeroDimensions,

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unknown leaf id {leaf_id} (model has {leaf_count} leaves)")]
    UnknownLeaf { leaf_id: usize, leaf_count: usize },

    #[error("unknown tree id {tree_id} (model has {tree_count} trees)")]
    UnknownTree { tree_id: usize, tree_count: usize },

    #[error("score vector from model generation {vector} used with generation {model}")]
    StaleScoreVector { vector: u64, model: u64 },

    #[error("empty population")]
    EmptyPopulation,

    #[error("cover problem row {row} is not covered by any subspace")]
    InfeasibleCover { row: usize },

    #[error("cover problem has {columns} subspaces, above the exact solver cap of {cap}")]
    CoverTooLarge { columns: usize, cap: usize },

    #[error("distribution support mismatch: {left} vs {right}")]
    SupportMismatch { left: usize, right: usize },

    #[error("drift baselines do not match the model: {0}")]
    BaselineMismatch(String),

    #[error("need at least {required} instances, got {actual}")]
    TooFewInstances { required: usize, actual: usize },

    #[error("oracle failed for instance {id}: {reason}")]
    Oracle { id: usize, reason: String },

    #[error("instance {0} was already labeled")]
    AlreadyLabeled(usize),

    #[error("unsupported model format: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AadError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        AadError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
