//! Active anomaly discovery over isolation-forest leaf ensembles.
//!
//! Every leaf of every tree is a weighted ensemble member. Analyst labels tune
//! the weights, groups of instances are described by small sets of leaf
//! subspaces, and a windowed streaming mode replaces trees whose leaf
//! distributions drift.
//!
//! The core is generic over the scalar type; `f64` aliases live at the crate
//! root, with `f32` variants suffixed `32`.

pub mod dataset;
pub mod description;
pub mod ensemble;
pub mod error;
pub mod learner;
pub mod log;
pub mod rank;
pub mod scalar;
pub mod stream;

pub use dataset::Label;
pub use error::{AadError, Result};
pub use scalar::Scalar;

pub type Dataset = dataset::Dataset<f64>;
pub type Dataset32 = dataset::Dataset<f32>;
pub type Model = ensemble::EnsembleModel<f64>;
pub type Model32 = ensemble::EnsembleModel<f32>;
pub type ScoreVector = ensemble::SparseScoreVector<f64>;
pub type ScoreVector32 = ensemble::SparseScoreVector<f32>;
pub type Tree = ensemble::IsolationTree<f64>;
pub type Store = learner::LabeledStore<f64>;
pub type Session = learner::ActiveSession<f64>;
pub type Subspace = description::Subspace<f64>;
pub type CoverProblem = description::CoverProblem<f64>;
pub type Description = description::Description<f64>;
