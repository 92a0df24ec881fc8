//! Hinge-loss weight objective with a uniform prior.
//!
//! Each labeled instance is compared twice against the tau-quantile anchor:
//! once against the fixed score `q_hat` of the anchor under the previous
//! weights, and once against the anchor's score under the weights being
//! optimized. Anomalies are penalized for falling below the anchor, nominals
//! for reaching it.

use std::borrow::Borrow;

use serde::{Deserialize, Serialize};

use super::store::LabeledStore;
use crate::dataset::Label;
use crate::ensemble::SparseScoreVector;
use crate::error::{AadError, Result};
use crate::rank::rank_descending;
use crate::scalar::Scalar;

/// Score and vector of the instance at rank `ceil(n * tau)` under `w_prev`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TauAnchor<S> {
    pub q_hat: S,
    pub z_tau: SparseScoreVector<S>,
    /// Position of the anchor in the population slice.
    pub index: usize,
}

/// Hinge loss of one labeled score against threshold `q`.
#[inline]
pub fn hinge<S: Scalar>(q: S, score: S, label: Label) -> S {
    match label {
        Label::Anomaly if score < q => q - score,
        Label::Nominal if score >= q => score - q,
        _ => S::zero(),
    }
}

pub fn hinge_loss<S: Scalar>(q: S, w: &[S], z: &SparseScoreVector<S>, label: Label) -> S {
    hinge(q, z.dot(w), label)
}

/// Rank position (1-based) `ceil(n * tau)` clamped to `[1, n]`.
pub fn anchor_rank(n: usize, tau: f64) -> usize {
    ((n as f64 * tau).ceil() as usize).clamp(1, n.max(1))
}

pub fn tau_anchor<S: Scalar, Z: Borrow<SparseScoreVector<S>>>(
    population: &[Z],
    w_prev: &[S],
    tau: f64,
) -> Result<TauAnchor<S>> {
    if population.is_empty() {
        return Err(AadError::EmptyPopulation);
    }
    let scores: Vec<S> = population.iter().map(|z| z.borrow().score(w_prev)).collect();
    let order = rank_descending(&scores);
    let index = order[anchor_rank(population.len(), tau) - 1];
    Ok(TauAnchor {
        q_hat: scores[index],
        z_tau: population[index].borrow().clone(),
        index,
    })
}

fn class_inverse_size<S: Scalar>(n: usize) -> S {
    if n == 0 {
        S::zero()
    } else {
        S::one() / S::of_usize(n)
    }
}

/// Objective value; an empty label class contributes nothing.
pub fn objective<S: Scalar>(w: &[S], anchor: &TauAnchor<S>, store: &LabeledStore<S>, lambda: S, w_unif: &[S]) -> S {
    let tau_score = anchor.z_tau.dot(w);
    let mut total = S::zero();
    for (class, items) in [(Label::Anomaly, store.positives()), (Label::Nominal, store.negatives())] {
        let inv = class_inverse_size::<S>(items.len());
        for (_, z) in items {
            let s = z.dot(w);
            total = total + inv * (hinge(anchor.q_hat, s, class) + hinge(tau_score, s, class));
        }
    }
    total + lambda * squared_distance(w, w_unif)
}

/// Subgradient of [`objective`]. At a kink (score exactly at the anchor) the
/// zero branch is used.
pub fn objective_gradient<S: Scalar>(
    w: &[S],
    anchor: &TauAnchor<S>,
    store: &LabeledStore<S>,
    lambda: S,
    w_unif: &[S],
) -> Vec<S> {
    let two_lambda = lambda + lambda;
    let mut grad: Vec<S> = w.iter().zip(w_unif).map(|(&wi, &ui)| two_lambda * (wi - ui)).collect();
    add_loss_gradient(&mut grad, w, anchor, store);
    grad
}

/// Adds the hinge-loss part of the subgradient into `grad`.
pub(crate) fn add_loss_gradient<S: Scalar>(grad: &mut [S], w: &[S], anchor: &TauAnchor<S>, store: &LabeledStore<S>) {
    let tau_score = anchor.z_tau.dot(w);
    for (class, items) in [(Label::Anomaly, store.positives()), (Label::Nominal, store.negatives())] {
        let inv = class_inverse_size::<S>(items.len());
        for (_, z) in items {
            let s = z.dot(w);
            match class {
                Label::Anomaly => {
                    if s < anchor.q_hat {
                        z.add_scaled_to(grad, -inv);
                    }
                    if s < tau_score {
                        // d/dw (z_tau.w - z.w)
                        anchor.z_tau.add_scaled_to(grad, inv);
                        z.add_scaled_to(grad, -inv);
                    }
                }
                Label::Nominal => {
                    if s > anchor.q_hat {
                        z.add_scaled_to(grad, inv);
                    }
                    if s > tau_score {
                        z.add_scaled_to(grad, inv);
                        anchor.z_tau.add_scaled_to(grad, -inv);
                    }
                }
            }
        }
    }
}

pub(crate) fn squared_distance<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(entries: &[(usize, f64)]) -> SparseScoreVector<f64> {
        SparseScoreVector::new(entries.to_vec(), false, 0)
    }

    #[test]
    fn hinge_cases() {
        assert_eq!(hinge(0.5, 0.7, Label::Anomaly), 0.0);
        assert!((hinge(0.5f64, 0.2, Label::Anomaly) - 0.3).abs() < 1e-15);
        assert!((hinge(0.5f64, 0.7, Label::Nominal) - 0.2).abs() < 1e-15);
        assert_eq!(hinge(0.5, 0.2, Label::Nominal), 0.0);
        // score exactly at the threshold: anomaly satisfied, nominal at zero loss
        assert_eq!(hinge(0.5, 0.5, Label::Anomaly), 0.0);
        assert_eq!(hinge(0.5, 0.5, Label::Nominal), 0.0);
    }

    #[test]
    fn anchor_positions() {
        assert_eq!(anchor_rank(10, 0.1), 1);
        assert_eq!(anchor_rank(3, 0.99), 3);
        assert_eq!(anchor_rank(5, 0.0001), 1);
        assert_eq!(anchor_rank(20, 0.25), 5);
    }

    #[test]
    fn anchor_picks_top_instance_for_small_tau() {
        let pop: Vec<_> = (0..10).map(|i| sv(&[(i, -(i as f64) - 1.0)])).collect();
        let w = vec![1.0; 10];
        let a = tau_anchor(&pop, &w, 0.1).unwrap();
        assert_eq!(a.index, 0);
        assert_eq!(a.q_hat, -1.0);
    }

    #[test]
    fn anchor_on_empty_population_fails() {
        let err = tau_anchor::<f64, SparseScoreVector<f64>>(&[], &[1.0], 0.1).unwrap_err();
        assert!(matches!(err, AadError::EmptyPopulation));
    }

    #[test]
    fn empty_store_objective_is_prior_only() {
        let anchor = TauAnchor {
            q_hat: -0.3,
            z_tau: sv(&[(0, -1.0)]),
            index: 0,
        };
        let store = LabeledStore::new();
        let u = vec![0.5f64; 4];
        let w = vec![1.0, 0.0, 0.0, 0.0];
        let expect = 0.25 + 3.0 * 0.25;
        assert!((objective(&w, &anchor, &store, 0.3, &u) - 0.3 * expect).abs() < 1e-15);
        assert_eq!(objective(&u, &anchor, &store, 0.3, &u), 0.0);
        let g = objective_gradient(&w, &anchor, &store, 0.3, &u);
        for (gi, (wi, ui)) in g.iter().zip(w.iter().zip(&u)) {
            assert!((gi - 0.6 * (wi - ui)).abs() < 1e-15);
        }
        assert!(objective_gradient(&u, &anchor, &store, 0.3, &u)
            .iter()
            .all(|&g| g == 0.0));
    }

    #[test]
    fn three_leaf_toy_matches_hand_computation() {
        // Leaves 0..3; w fixed; two positives and one negative.
        let w = vec![0.6, 0.0, 0.8];
        let u = vec![1.0 / 3f64.sqrt(); 3];
        let z_tau = sv(&[(0, -0.5), (2, -0.5)]); // w.z_tau = -0.7
        let anchor = TauAnchor {
            q_hat: -0.4,
            z_tau,
            index: 0,
        };
        let mut store = LabeledStore::new();
        store.insert(1, sv(&[(0, -1.0)]), Label::Anomaly).unwrap(); // score -0.6
        store.insert(2, sv(&[(2, -0.25)]), Label::Anomaly).unwrap(); // score -0.2
        store.insert(3, sv(&[(1, -1.0), (2, -0.5)]), Label::Nominal).unwrap(); // score -0.4
                                                                               // positives: p1 below q_hat by 0.2, above tau score; p2 satisfied both
                                                                               //   => (1/2) * (0.2 + 0 + 0 + 0) = 0.1
                                                                               // negative: score -0.4 >= q_hat -0.4 (loss 0), >= tau -0.7 (loss 0.3) => 0.3
        let lambda = 0.125;
        let dist: f64 = w.iter().zip(&u).map(|(a, b)| (a - b) * (a - b)).sum();
        let want = 0.1 + 0.3 + lambda * dist;
        let got = objective(&w, &anchor, &store, lambda, &u);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!((hinge_loss(-0.4, &w, &store.positives()[0].1, Label::Anomaly) - 0.2).abs() < 1e-12);
    }
}
