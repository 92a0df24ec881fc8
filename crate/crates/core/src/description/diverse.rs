use std::collections::BTreeSet;

use super::cover::{build_cover_problem, solve_cover};
use crate::ensemble::EnsembleModel;
use crate::error::Result;
use crate::scalar::{total_cmp, Scalar};

/// A query candidate with its current anomaly score.
#[derive(Debug, Clone, Copy)]
pub struct Candidate<'a, S> {
    pub id: usize,
    pub x: &'a [S],
    pub score: S,
}

/// Picks `b` candidates whose covering subspaces overlap as little as possible.
///
/// A compact cover `S*` is computed over all candidates. Each candidate is
/// mapped to the members of `S*` that contain it. The highest-scoring
/// candidate goes first; every later pick minimizes the number of shared
/// members with those already picked, breaking ties by higher score and then
/// lower id.
pub fn select_diverse<S: Scalar>(
    model: &EnsembleModel<S>,
    candidates: &[Candidate<'_, S>],
    b: usize,
    delta: usize,
) -> Result<Vec<usize>> {
    let mut ranked: Vec<&Candidate<'_, S>> = candidates.iter().collect();
    ranked.sort_by(|a, c| total_cmp(c.score, a.score).then(a.id.cmp(&c.id)));
    if b >= ranked.len() {
        return Ok(ranked.iter().map(|c| c.id).collect());
    }
    if b == 0 {
        return Ok(Vec::new());
    }

    let instances: Vec<(usize, &[S])> = ranked.iter().map(|c| (c.id, c.x)).collect();
    let problem = build_cover_problem(model, &instances, delta)?;
    let cover = solve_cover(&problem)?;
    let regions: Vec<BTreeSet<usize>> = (0..ranked.len())
        .map(|i| {
            cover
                .columns
                .iter()
                .copied()
                .filter(|&j| problem.membership[i][j])
                .collect()
        })
        .collect();

    let mut picked = vec![0usize];
    let mut used: BTreeSet<usize> = regions[0].clone();
    while picked.len() < b {
        let next = (0..ranked.len())
            .filter(|i| !picked.contains(i))
            .min_by(|&i, &j| {
                let oi = regions[i].intersection(&used).count();
                let oj = regions[j].intersection(&used).count();
                oi.cmp(&oj)
                    .then(total_cmp(ranked[j].score, ranked[i].score))
                    .then(ranked[i].id.cmp(&ranked[j].id))
            })
            .expect("fewer picks than candidates");
        used.extend(regions[next].iter().copied());
        picked.push(next);
    }
    Ok(picked.into_iter().map(|i| ranked[i].id).collect())
}
