//! Weight learning from analyst feedback and the batch query loop.

mod active;
mod objective;
mod optimize;
mod store;

pub use active::{
    batch_active_learn, rank_entries, select_top, Aborted, ActiveSession, BatchOutcome, LabelOracle, PoolEntry,
    QueryStrategy, SessionSettings,
};
pub use objective::{anchor_rank, hinge, hinge_loss, objective, objective_gradient, tau_anchor, TauAnchor};
pub use optimize::{
    initial_weights, learn_weights, learn_weights_traced, InitMode, LambdaMode, LearnOutcome, LearnerConfig,
};
pub use store::LabeledStore;
