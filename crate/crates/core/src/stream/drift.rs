use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::ensemble::{EnsembleModel, IsolationTree};
use crate::error::{AadError, Result};
use crate::rank::mix_seed;
use crate::scalar::Scalar;

/// Share of a tree's instances falling in each of its leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafDistribution {
    pub probs: Vec<f64>,
}

/// Default smoothing for a sample of `n` instances.
pub fn default_eps(n: usize) -> f64 {
    1.0 / (2.0 * n as f64)
}

/// Leaf frequencies of `xs` in `tree`, each raised by `eps` (in probability
/// units) and renormalized. `None` uses [`default_eps`].
pub fn tree_distribution<S: Scalar, P: AsRef<[S]>>(
    tree: &IsolationTree<S>,
    xs: &[P],
    eps: Option<f64>,
) -> Result<LeafDistribution> {
    if xs.is_empty() {
        return Err(AadError::EmptyDataset);
    }
    let eps = eps.unwrap_or_else(|| default_eps(xs.len()));
    if !(eps >= 0.0) {
        return Err(AadError::invalid("smoothing_eps", "must be non-negative"));
    }
    let mut counts = vec![0usize; tree.leaf_count()];
    for x in xs {
        counts[tree.leaf_for(x.as_ref())] += 1;
    }
    let n = xs.len() as f64;
    let mut probs: Vec<f64> = counts.iter().map(|&c| c as f64 / n + eps).collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(LeafDistribution { probs })
}

pub fn ensemble_distribution<S: Scalar, P: AsRef<[S]> + Sync>(
    model: &EnsembleModel<S>,
    xs: &[P],
    eps: Option<f64>,
) -> Result<Vec<LeafDistribution>> {
    if let Some(x) = xs.iter().find(|x| x.as_ref().len() != model.dims()) {
        return Err(AadError::DimensionMismatch {
            expected: model.dims(),
            actual: x.as_ref().len(),
        });
    }
    model
        .trees()
        .par_iter()
        .map(|t| tree_distribution(t, xs, eps))
        .collect()
}

/// `sum p_i ln(p_i / q_i)`; zero-probability terms of `p` contribute nothing.
pub fn kl_divergence(p: &LeafDistribution, q: &LeafDistribution) -> Result<f64> {
    if p.probs.len() != q.probs.len() {
        return Err(AadError::SupportMismatch {
            left: p.probs.len(),
            right: q.probs.len(),
        });
    }
    let kl: f64 = p
        .probs
        .iter()
        .zip(&q.probs)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).ln())
        .sum();
    // Rounding can leave a tiny negative value for equal inputs.
    Ok(kl.max(0.0))
}

/// Per-tree divergences between two random halves of `xs`, over `n_reps` splits.
///
/// Returns the pooled `T * n_reps` values, in (repetition, tree) order.
pub fn pooled_half_split_kl<S: Scalar, P: AsRef<[S]> + Sync>(
    model: &EnsembleModel<S>,
    xs: &[P],
    n_reps: usize,
    eps: Option<f64>,
    seed: u64,
) -> Result<Vec<f64>> {
    if xs.len() < 4 {
        return Err(AadError::TooFewInstances {
            required: 4,
            actual: xs.len(),
        });
    }
    if n_reps == 0 {
        return Err(AadError::invalid("n_reps", "must be at least 1"));
    }
    let half = xs.len() / 2;
    let mut pooled = Vec::with_capacity(n_reps * model.n_trees());
    for rep in 0..n_reps {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix_seed(seed, rep as u64)));
        let first: Vec<&[S]> = order[..half].iter().map(|&i| xs[i].as_ref()).collect();
        let second: Vec<&[S]> = order[half..2 * half].iter().map(|&i| xs[i].as_ref()).collect();
        let p = ensemble_distribution(model, &first, eps)?;
        let q = ensemble_distribution(model, &second, eps)?;
        for (a, b) in p.iter().zip(&q) {
            pooled.push(kl_divergence(a, b)?);
        }
    }
    Ok(pooled)
}

/// Nearest-rank `level` quantile: the `ceil(level * n)`-th smallest value.
pub fn nearest_rank_quantile(values: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(AadError::EmptyPopulation);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((level * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Drift threshold: the `1 - alpha_kl` quantile of pooled half-split divergences.
pub fn kl_threshold<S: Scalar, P: AsRef<[S]> + Sync>(
    model: &EnsembleModel<S>,
    xs: &[P],
    alpha_kl: f64,
    n_reps: usize,
    eps: Option<f64>,
    seed: u64,
) -> Result<f64> {
    check_alpha(alpha_kl)?;
    let pooled = pooled_half_split_kl(model, xs, n_reps, eps, seed)?;
    nearest_rank_quantile(&pooled, 1.0 - alpha_kl)
}

fn check_alpha(alpha_kl: f64) -> Result<()> {
    if !(alpha_kl > 0.0 && alpha_kl < 1.0) {
        return Err(AadError::invalid("alpha_kl", format!("{alpha_kl} is outside (0, 1)")));
    }
    Ok(())
}

/// Reference leaf distributions and the divergence threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftState {
    pub baselines: Vec<LeafDistribution>,
    pub q_kl: f64,
    pub alpha_kl: f64,
    pub n_reps: usize,
}

impl DriftState {
    /// Baselines and threshold estimated from `xs`.
    pub fn fit<S: Scalar, P: AsRef<[S]> + Sync>(
        model: &EnsembleModel<S>,
        xs: &[P],
        alpha_kl: f64,
        n_reps: usize,
        eps: Option<f64>,
        seed: u64,
    ) -> Result<Self> {
        Ok(DriftState {
            baselines: ensemble_distribution(model, xs, eps)?,
            q_kl: kl_threshold(model, xs, alpha_kl, n_reps, eps, seed)?,
            alpha_kl,
            n_reps,
        })
    }

    /// Smallest drifted-tree count that triggers replacement: `2 * alpha_kl * T`.
    pub fn trigger_count(&self, n_trees: usize) -> usize {
        ((2.0 * self.alpha_kl * n_trees as f64 - 1e-9).ceil() as usize).max(1)
    }
}

/// Per-tree divergences of a new window and the trees above threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftCheck {
    pub divergences: Vec<f64>,
    pub drifted: BTreeSet<usize>,
}

/// Trees whose `KL(baseline || window)` exceeds the state's threshold.
pub fn detect_drift<S: Scalar, P: AsRef<[S]> + Sync>(
    state: &DriftState,
    model: &EnsembleModel<S>,
    xs: &[P],
    eps: Option<f64>,
) -> Result<DriftCheck> {
    if state.baselines.len() != model.n_trees() {
        return Err(AadError::BaselineMismatch(format!(
            "{} baselines for {} trees",
            state.baselines.len(),
            model.n_trees()
        )));
    }
    let current = ensemble_distribution(model, xs, eps)?;
    let divergences = state
        .baselines
        .iter()
        .zip(&current)
        .enumerate()
        .map(|(t, (p, q))| {
            kl_divergence(p, q).map_err(|_| AadError::BaselineMismatch(format!("tree {t} changed its leaf count")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let drifted = divergences
        .iter()
        .enumerate()
        .filter(|(_, &kl)| kl > state.q_kl)
        .map(|(t, _)| t)
        .collect();
    Ok(DriftCheck { divergences, drifted })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum UpdateMode {
    None,
    /// Replace the `ceil(fraction * T)` oldest trees every window.
    ReplaceFraction {
        fraction: f64,
    },
    KlAdaptive,
}

#[derive(Debug, Clone)]
pub struct ModelUpdate<S> {
    pub model: EnsembleModel<S>,
    pub state: DriftState,
    pub n_drifted: usize,
    pub replaced: BTreeSet<usize>,
}

/// Applies one window's model update.
///
/// Whenever trees are replaced, all baselines and the threshold are refit on
/// the new window; otherwise the state is kept as is.
pub fn update_model<S: Scalar>(
    model: &EnsembleModel<S>,
    state: &DriftState,
    xs: &[Vec<S>],
    mode: UpdateMode,
    eps: Option<f64>,
    seed: u64,
    window: usize,
) -> Result<ModelUpdate<S>> {
    if xs.is_empty() {
        return Err(AadError::EmptyDataset);
    }
    let check = detect_drift(state, model, xs, eps)?;
    let n_drifted = check.drifted.len();
    let replaced = match mode {
        UpdateMode::None => BTreeSet::new(),
        UpdateMode::ReplaceFraction { fraction } => {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(AadError::invalid("fraction", format!("{fraction} is outside [0, 1]")));
            }
            model.oldest_trees((fraction * model.n_trees() as f64 - 1e-9).ceil().max(0.0) as usize)
        }
        UpdateMode::KlAdaptive if n_drifted >= state.trigger_count(model.n_trees()) => check.drifted,
        UpdateMode::KlAdaptive => BTreeSet::new(),
    };
    if replaced.is_empty() {
        return Ok(ModelUpdate {
            model: model.clone(),
            state: state.clone(),
            n_drifted,
            replaced,
        });
    }
    let data = Dataset::unlabeled(xs.to_vec())?;
    let new_model = model.replace_trees(&replaced, &data, mix_seed(seed, 2 * window as u64), window)?;
    let new_state = DriftState::fit(
        &new_model,
        xs,
        state.alpha_kl,
        state.n_reps,
        eps,
        mix_seed(seed, 2 * window as u64 + 1),
    )?;
    Ok(ModelUpdate {
        model: new_model,
        state: new_state,
        n_drifted,
        replaced,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Node;

    fn two_leaf_tree() -> IsolationTree<f64> {
        IsolationTree::from_nodes(
            vec![
                Node::Internal {
                    feature: 0,
                    split: 0.5,
                    left: 1,
                    right: 2,
                },
                Node::Leaf {
                    local_id: 0,
                    depth: 1,
                    sample_count: 1,
                },
                Node::Leaf {
                    local_id: 1,
                    depth: 1,
                    sample_count: 1,
                },
            ],
            vec![(0.0, 1.0)],
        )
    }

    #[test]
    fn split_three_to_one() {
        let xs = vec![vec![0.1], vec![0.2], vec![0.3], vec![0.9]];
        let d = tree_distribution(&two_leaf_tree(), &xs, Some(0.0)).unwrap();
        assert_eq!(d.probs, vec![0.75, 0.25]);
    }

    #[test]
    fn default_smoothing_is_half_a_count() {
        let xs = vec![vec![0.1], vec![0.2]];
        let d = tree_distribution(&two_leaf_tree(), &xs, None).unwrap();
        // (1 + 1/4) / 1.5 and (0 + 1/4) / 1.5
        assert!((d.probs[0] - 1.25 / 1.5).abs() < 1e-15);
        assert!((d.probs[1] - 0.25 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn empty_input_fails() {
        let xs: Vec<Vec<f64>> = Vec::new();
        assert!(tree_distribution(&two_leaf_tree(), &xs, None).is_err());
    }

    #[test]
    fn kl_basics() {
        let p = LeafDistribution {
            probs: vec![0.25, 0.75],
        };
        assert_eq!(kl_divergence(&p, &p).unwrap(), 0.0);
        let q = LeafDistribution { probs: vec![0.5, 0.5] };
        let want = 0.25 * (0.5f64).ln() + 0.75 * (1.5f64).ln();
        assert!((kl_divergence(&p, &q).unwrap() - want).abs() < 1e-15);
        let short = LeafDistribution { probs: vec![1.0] };
        assert!(matches!(
            kl_divergence(&p, &short),
            Err(AadError::SupportMismatch { .. })
        ));
    }

    #[test]
    fn quantile_nearest_rank() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(nearest_rank_quantile(&v, 0.95).unwrap(), 5.0);
        assert_eq!(nearest_rank_quantile(&v, 0.4).unwrap(), 2.0);
        assert_eq!(nearest_rank_quantile(&v, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn trigger_count_for_default_alpha() {
        let s = DriftState {
            baselines: Vec::new(),
            q_kl: 0.0,
            alpha_kl: 0.05,
            n_reps: 10,
        };
        assert_eq!(s.trigger_count(100), 10);
        assert_eq!(s.trigger_count(10), 1);
    }
}
