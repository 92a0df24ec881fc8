use std::borrow::Borrow;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::objective::{add_loss_gradient, objective, tau_anchor, TauAnchor};
use super::store::LabeledStore;
use crate::ensemble::SparseScoreVector;
use crate::error::{AadError, Result};
use crate::scalar::{l2_norm, normalize_in_place, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    Uniform,
    /// Random direction on the unit sphere.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LambdaMode {
    /// `0.5 / (|H+| + |H-|)`, or `0.5` with no labels.
    BatchDecay,
    ConstantHalf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    pub tau: f64,
    pub prior_enabled: bool,
    pub init_mode: InitMode,
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tolerance: f64,
    pub lambda_mode: LambdaMode,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            tau: 0.03,
            prior_enabled: true,
            init_mode: InitMode::Uniform,
            step_size: 0.01,
            max_iters: 1000,
            grad_tolerance: 1e-6,
            lambda_mode: LambdaMode::BatchDecay,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(AadError::invalid("tau", format!("{} is outside (0, 1)", self.tau)));
        }
        if !(self.step_size > 0.0) {
            return Err(AadError::invalid("step_size", "must be positive"));
        }
        Ok(())
    }

    /// Prior strength for a store holding `n_labeled` instances; zero when the
    /// prior is disabled.
    pub fn lambda(&self, n_labeled: usize) -> f64 {
        if !self.prior_enabled {
            return 0.0;
        }
        match self.lambda_mode {
            LambdaMode::ConstantHalf => 0.5,
            LambdaMode::BatchDecay if n_labeled == 0 => 0.5,
            LambdaMode::BatchDecay => 0.5 / n_labeled as f64,
        }
    }
}

/// Starting weights `w^(0)` of length `m`.
pub fn initial_weights<S: Scalar>(m: usize, mode: InitMode, seed: u64) -> Vec<S> {
    match mode {
        InitMode::Uniform => vec![S::one() / S::of_usize(m).sqrt(); m],
        InitMode::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut w: Vec<S> = (0..m).map(|_| S::of(StandardNormal.sample(&mut rng))).collect();
            normalize_in_place(&mut w);
            w
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnOutcome<S> {
    pub weights: Vec<S>,
    pub anchor: TauAnchor<S>,
    pub lambda: S,
    pub iterations: usize,
    /// Objective value at the start and after every step, when requested.
    pub trace: Vec<S>,
}

/// Fits new unit-norm weights by projected gradient descent started at `w_prev`.
///
/// The anchor is computed once from `w_prev` over `population`. Each fixed-size
/// step is followed by renormalization to unit length. Stops after `max_iters`
/// steps or as soon as the gradient norm drops below `grad_tolerance`.
///
/// The hinge terms make the objective non-smooth. With the prior on, the
/// iterate can end up cycling around a kink instead of settling, so the
/// objective trace is not monotone in general.
pub fn learn_weights<S: Scalar, Z: Borrow<SparseScoreVector<S>>>(
    population: &[Z],
    store: &LabeledStore<S>,
    config: &LearnerConfig,
    w_prev: &[S],
) -> Result<LearnOutcome<S>> {
    learn(population, store, config, w_prev, false)
}

/// Same as [`learn_weights`] and also records the objective after every step.
pub fn learn_weights_traced<S: Scalar, Z: Borrow<SparseScoreVector<S>>>(
    population: &[Z],
    store: &LabeledStore<S>,
    config: &LearnerConfig,
    w_prev: &[S],
) -> Result<LearnOutcome<S>> {
    learn(population, store, config, w_prev, true)
}

fn learn<S: Scalar, Z: Borrow<SparseScoreVector<S>>>(
    population: &[Z],
    store: &LabeledStore<S>,
    config: &LearnerConfig,
    w_prev: &[S],
    traced: bool,
) -> Result<LearnOutcome<S>> {
    config.validate()?;
    let anchor = tau_anchor(population, w_prev, config.tau)?;
    let m = w_prev.len();
    let lambda = S::of(config.lambda(store.len()));
    let two_lambda = lambda + lambda;
    let unif = S::one() / S::of_usize(m).sqrt();
    let step = S::of(config.step_size);
    let tolerance = S::of(config.grad_tolerance);

    let w_unif = vec![unif; m];
    let mut w = w_prev.to_vec();
    let mut grad = vec![S::zero(); m];
    let mut trace = Vec::new();
    if traced {
        trace.push(objective(&w, &anchor, store, lambda, &w_unif));
    }

    let mut iterations = 0;
    while iterations < config.max_iters {
        for (g, &wi) in grad.iter_mut().zip(&w) {
            *g = two_lambda * (wi - unif);
        }
        add_loss_gradient(&mut grad, &w, &anchor, store);
        if l2_norm(&grad) < tolerance {
            break;
        }
        for (wi, &g) in w.iter_mut().zip(&grad) {
            *wi = *wi - step * g;
        }
        normalize_in_place(&mut w);
        iterations += 1;
        if traced {
            trace.push(objective(&w, &anchor, store, lambda, &w_unif));
        }
    }

    Ok(LearnOutcome {
        weights: w,
        anchor,
        lambda,
        iterations,
        trace,
    })
}
