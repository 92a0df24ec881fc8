use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::subspace::{denormalize, Subspace};
use crate::ensemble::EnsembleModel;
use crate::error::{AadError, Result};
use crate::scalar::{total_cmp, Scalar};

/// Largest column count handed to [`solve_cover_exact`] by default.
pub const EXACT_COVER_CAP: usize = 64;

/// Default number of subspaces kept per instance.
pub const DEFAULT_DELTA: usize = 5;

/// The `delta` most relevant leaves containing `x`, highest relevance first
/// (ties to the lower leaf id).
pub fn top_relevant_subspaces<S: Scalar>(model: &EnsembleModel<S>, x: &[S], delta: usize) -> Result<Vec<usize>> {
    if delta == 0 {
        return Err(AadError::invalid("delta", "must be at least 1"));
    }
    let mut leaves = model.leaves_of(x)?;
    let w = model.weights();
    let d = model.leaf_scores();
    leaves.sort_by(|&a, &b| total_cmp(w[b] * d[b], w[a] * d[a]).then(a.cmp(&b)));
    leaves.truncate(delta);
    Ok(leaves)
}

/// Weighted set-cover instance: rows are instances, columns are subspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct CoverProblem<S> {
    /// Leaf id of every column, ascending.
    pub columns: Vec<usize>,
    /// Geometry of every column; empty for problems built with [`CoverProblem::from_parts`].
    pub subspaces: Vec<Subspace<S>>,
    /// Instance id of every row.
    pub instances: Vec<usize>,
    pub membership: Vec<Vec<bool>>,
    pub costs: Vec<S>,
    pub delta: usize,
}

impl<S: Scalar> CoverProblem<S> {
    /// Abstract problem over columns `0..k`, used for testing the solvers.
    pub fn from_parts(membership: Vec<Vec<bool>>, costs: Vec<S>) -> Result<Self> {
        let k = costs.len();
        if let Some(row) = membership.iter().find(|r| r.len() != k) {
            return Err(AadError::DimensionMismatch {
                expected: k,
                actual: row.len(),
            });
        }
        Ok(CoverProblem {
            columns: (0..k).collect(),
            subspaces: Vec::new(),
            instances: (0..membership.len()).collect(),
            membership,
            costs,
            delta: k,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.membership.len()
    }

    pub fn n_columns(&self) -> usize {
        self.costs.len()
    }

    /// Whether the columns in `selection` cover every row.
    pub fn is_covered_by(&self, selection: &[usize]) -> bool {
        self.membership.iter().all(|row| selection.iter().any(|&j| row[j]))
    }

    fn check_feasible(&self) -> Result<()> {
        match self.membership.iter().position(|row| !row.iter().any(|&b| b)) {
            Some(row) => Err(AadError::InfeasibleCover { row }),
            None => Ok(()),
        }
    }

    /// Sum of column costs, accumulated in ascending column order.
    pub fn selection_cost(&self, selection: &[usize]) -> f64 {
        let mut cols = selection.to_vec();
        cols.sort_unstable();
        cols.iter().map(|&j| self.costs[j].as_f64()).sum()
    }

    fn describe(&self, mut selection: Vec<usize>) -> Description<S> {
        selection.sort_unstable();
        let total = self.selection_cost(&selection);
        Description {
            selected: selection.iter().map(|&j| self.columns[j]).collect(),
            columns: selection,
            total_cost: S::of(total),
        }
    }
}

/// Columns of the union of every instance's top-`delta` subspaces, with
/// membership decided by geometric containment.
pub fn build_cover_problem<S: Scalar>(
    model: &EnsembleModel<S>,
    instances: &[(usize, &[S])],
    delta: usize,
) -> Result<CoverProblem<S>> {
    if instances.is_empty() {
        return Err(AadError::EmptyPopulation);
    }
    let mut leaves = BTreeSet::new();
    for (_, x) in instances {
        leaves.extend(top_relevant_subspaces(model, x, delta)?);
    }
    let subspaces: Vec<Subspace<S>> = leaves
        .iter()
        .map(|&leaf| Subspace::of_leaf(model, leaf))
        .collect::<Result<_>>()?;
    let membership = instances
        .iter()
        .map(|(_, x)| subspaces.iter().map(|s| s.contains(x)).collect())
        .collect();
    Ok(CoverProblem {
        columns: leaves.into_iter().collect(),
        costs: subspaces.iter().map(|s| s.cost).collect(),
        subspaces,
        instances: instances.iter().map(|(id, _)| *id).collect(),
        membership,
        delta,
    })
}

/// Selected subspaces of a cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Description<S> {
    /// Leaf ids, ascending.
    pub selected: Vec<usize>,
    /// Column indices into the originating problem, ascending.
    pub columns: Vec<usize>,
    pub total_cost: S,
}

/// Minimum-cost cover by branch and bound.
///
/// Among optima of equal cost the lexicographically smallest ascending column
/// list is returned.
pub fn solve_cover_exact<S: Scalar>(problem: &CoverProblem<S>) -> Result<Description<S>> {
    solve_cover_exact_capped(problem, EXACT_COVER_CAP)
}

pub fn solve_cover_exact_capped<S: Scalar>(problem: &CoverProblem<S>, cap: usize) -> Result<Description<S>> {
    let k = problem.n_columns();
    if k > cap {
        return Err(AadError::CoverTooLarge { columns: k, cap });
    }
    problem.check_feasible()?;
    let greedy = greedy_columns(problem);
    let mut search = Search {
        problem,
        costs: problem.costs.iter().map(|c| c.as_f64()).collect(),
        rows_of: (0..k)
            .map(|j| (0..problem.n_rows()).filter(|&i| problem.membership[i][j]).collect())
            .collect(),
        best_cost: problem.selection_cost(&greedy),
        best: sorted(greedy),
    };
    let mut chosen = Vec::new();
    let mut forbidden = vec![false; k];
    let mut cover_count = vec![0usize; problem.n_rows()];
    search.branch(&mut chosen, &mut forbidden, &mut cover_count, 0.0);
    let best = search.best;
    Ok(problem.describe(best))
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

struct Search<'a, S> {
    problem: &'a CoverProblem<S>,
    costs: Vec<f64>,
    rows_of: Vec<Vec<usize>>,
    best_cost: f64,
    best: Vec<usize>,
}

impl<S: Scalar> Search<'_, S> {
    fn tolerance(&self) -> f64 {
        1e-12 * self.best_cost.abs().max(1.0)
    }

    fn branch(&mut self, chosen: &mut Vec<usize>, forbidden: &mut [bool], cover_count: &mut [usize], cost: f64) {
        let membership = &self.problem.membership;
        // Pick the uncovered row with fewest available columns; also the bound.
        let mut pivot: Option<(usize, usize)> = None;
        let mut bound = 0.0f64;
        for (i, row) in membership.iter().enumerate() {
            if cover_count[i] > 0 {
                continue;
            }
            let mut options = 0;
            let mut cheapest = f64::INFINITY;
            for (j, &inside) in row.iter().enumerate() {
                if inside && !forbidden[j] {
                    options += 1;
                    cheapest = cheapest.min(self.costs[j]);
                }
            }
            if options == 0 {
                return;
            }
            bound = bound.max(cheapest);
            if pivot.is_none_or(|(_, n)| options < n) {
                pivot = Some((i, options));
            }
        }
        let Some((row, _)) = pivot else {
            self.offer(chosen);
            return;
        };
        if cost + bound > self.best_cost + self.tolerance() {
            return;
        }

        let candidates: Vec<usize> = (0..self.costs.len())
            .filter(|&j| membership[row][j] && !forbidden[j])
            .collect();
        let mut newly_forbidden = Vec::new();
        for j in candidates {
            chosen.push(j);
            for &i in &self.rows_of[j] {
                cover_count[i] += 1;
            }
            forbidden[j] = true;
            self.branch(chosen, forbidden, cover_count, cost + self.costs[j]);
            for &i in &self.rows_of[j] {
                cover_count[i] -= 1;
            }
            chosen.pop();
            // Later branches exclude j, so each cover is visited once.
            newly_forbidden.push(j);
        }
        for j in newly_forbidden {
            forbidden[j] = false;
        }
    }

    fn offer(&mut self, chosen: &[usize]) {
        let selection = sorted(chosen.to_vec());
        let cost = self.problem.selection_cost(&selection);
        let tol = self.tolerance();
        if cost < self.best_cost - tol || (cost <= self.best_cost + tol && selection < self.best) {
            self.best_cost = cost;
            self.best = selection;
        }
    }
}

/// Repeatedly takes the column with the lowest cost per newly covered row
/// (ties to the lower column).
pub fn solve_cover_greedy<S: Scalar>(problem: &CoverProblem<S>) -> Result<Description<S>> {
    problem.check_feasible()?;
    Ok(problem.describe(greedy_columns(problem)))
}

fn greedy_columns<S: Scalar>(problem: &CoverProblem<S>) -> Vec<usize> {
    let p = problem.n_rows();
    let k = problem.n_columns();
    let mut covered = vec![false; p];
    let mut remaining = p;
    let mut taken = Vec::new();
    while remaining > 0 {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..k {
            let gain = (0..p).filter(|&i| !covered[i] && problem.membership[i][j]).count();
            if gain == 0 {
                continue;
            }
            let ratio = problem.costs[j].as_f64() / gain as f64;
            if best.is_none_or(|(_, r)| ratio < r) {
                best = Some((j, ratio));
            }
        }
        let Some((j, _)) = best else { break };
        for i in 0..p {
            if !covered[i] && problem.membership[i][j] {
                covered[i] = true;
                remaining -= 1;
            }
        }
        taken.push(j);
    }
    taken
}

/// Exact when the problem is within the cap, greedy otherwise.
pub fn solve_cover<S: Scalar>(problem: &CoverProblem<S>) -> Result<Description<S>> {
    if problem.n_columns() <= EXACT_COVER_CAP {
        solve_cover_exact(problem)
    } else {
        solve_cover_greedy(problem)
    }
}

/// One selected subspace in original feature units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceExport {
    pub leaf_id: usize,
    pub tree: usize,
    pub bounds: Vec<[f64; 2]>,
    pub cost: f64,
    pub relevance: f64,
    pub instances: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptionExport {
    pub total_cost: f64,
    pub subspaces: Vec<SubspaceExport>,
}

/// Export of a description built by [`build_cover_problem`].
pub fn export_description<S: Scalar>(
    model: &EnsembleModel<S>,
    problem: &CoverProblem<S>,
    description: &Description<S>,
) -> Result<DescriptionExport> {
    let subspaces = description
        .columns
        .iter()
        .map(|&j| {
            let s = problem
                .subspaces
                .get(j)
                .ok_or_else(|| AadError::invalid("problem", "has no subspace geometry"))?;
            Ok(export_subspace(
                model,
                s,
                |i| problem.membership[i][j],
                &problem.instances,
            ))
        })
        .collect::<Result<_>>()?;
    Ok(DescriptionExport {
        total_cost: description.total_cost.as_f64(),
        subspaces,
    })
}

pub(crate) fn export_subspace<S: Scalar>(
    model: &EnsembleModel<S>,
    s: &Subspace<S>,
    inside: impl Fn(usize) -> bool,
    ids: &[usize],
) -> SubspaceExport {
    SubspaceExport {
        leaf_id: s.leaf_id,
        tree: s.tree,
        bounds: s
            .normalized
            .iter()
            .zip(model.feature_ranges())
            .map(|(&(lo, hi), &range)| [denormalize(lo, range).as_f64(), denormalize(hi, range).as_f64()])
            .collect(),
        cost: s.cost.as_f64(),
        relevance: s.relevance.as_f64(),
        instances: ids
            .iter()
            .enumerate()
            .filter(|&(i, _)| inside(i))
            .map(|(_, &id)| id)
            .collect(),
    }
}
