//! Compact descriptions of instance groups as minimum-volume sets of leaf
//! subspaces, and diversity-aware query selection built on them.

mod cover;
mod diverse;
mod subspace;

pub use cover::{
    build_cover_problem, export_description, solve_cover, solve_cover_exact, solve_cover_exact_capped,
    solve_cover_greedy, top_relevant_subspaces, CoverProblem, Description, DescriptionExport, SubspaceExport,
    DEFAULT_DELTA, EXACT_COVER_CAP,
};
pub use diverse::{select_diverse, Candidate};
pub use subspace::{denormalize, Subspace, MIN_VOLUME};

use crate::ensemble::EnsembleModel;
use crate::error::Result;
use crate::scalar::Scalar;

/// Export of an instance's own top-`delta` subspaces, as shown next to a query.
pub fn describe_instance<S: Scalar>(
    model: &EnsembleModel<S>,
    id: usize,
    x: &[S],
    delta: usize,
) -> Result<Vec<SubspaceExport>> {
    top_relevant_subspaces(model, x, delta)?
        .into_iter()
        .map(|leaf| {
            let s = Subspace::of_leaf(model, leaf)?;
            Ok(cover::export_subspace(model, &s, |_| true, &[id]))
        })
        .collect()
}
