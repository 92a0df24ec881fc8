use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::optimize::{initial_weights, learn_weights, LearnerConfig};
use super::store::LabeledStore;
use crate::dataset::{Dataset, Label};
use crate::description::{select_diverse, Candidate, DEFAULT_DELTA};
use crate::ensemble::{EnsembleModel, SparseScoreVector};
use crate::error::{AadError, Result};
use crate::log::{weight_hash, QueryRecord, SessionLog};
use crate::scalar::{total_cmp, Scalar};

/// Source of ground-truth labels for queried instances.
pub trait LabelOracle {
    fn label(&mut self, id: usize) -> Result<Label>;
}

impl<F: FnMut(usize) -> Result<Label>> LabelOracle for F {
    fn label(&mut self, id: usize) -> Result<Label> {
        self(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum QueryStrategy {
    Top,
    /// Minimal-overlap picks among the `candidates` best-ranked instances.
    Diverse {
        candidates: usize,
        delta: usize,
    },
}

impl QueryStrategy {
    pub fn diverse_default() -> Self {
        QueryStrategy::Diverse {
            candidates: 10,
            delta: DEFAULT_DELTA,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionSettings {
    pub budget: usize,
    pub batch_size: usize,
    pub strategy: QueryStrategy,
    /// Normalize score vectors to unit length before learning and scoring.
    pub normalize: bool,
    /// When false the weights stay at their initial value (unsupervised arm).
    pub update_weights: bool,
    /// Seed for random weight initialization.
    pub seed: u64,
    /// Keep a copy of the weights before every query in the log.
    pub record_weights: bool,
}

impl Default for SessionSettings {
    fn default() -> Self {
        SessionSettings {
            budget: 60,
            batch_size: 1,
            strategy: QueryStrategy::Top,
            normalize: true,
            update_weights: true,
            seed: 0,
            record_weights: false,
        }
    }
}

impl SessionSettings {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(AadError::invalid("batch_size", "must be at least 1"));
        }
        if let QueryStrategy::Diverse { candidates, delta } = self.strategy {
            if delta == 0 {
                return Err(AadError::invalid("delta", "must be at least 1"));
            }
            if candidates < self.batch_size {
                return Err(AadError::invalid("candidates", "must be at least the batch size"));
            }
        }
        Ok(())
    }
}

/// An unlabeled instance held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry<S> {
    pub id: usize,
    pub x: Vec<S>,
    pub z: SparseScoreVector<S>,
}

/// Positions of `zs` by descending score under `w`; ties go to the lower id.
pub fn rank_entries<S: Scalar>(entries: &[PoolEntry<S>], w: &[S]) -> Vec<usize> {
    let scores: Vec<S> = entries.iter().map(|e| e.z.score(w)).collect();
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&a, &b| total_cmp(scores[b], scores[a]).then(entries[a].id.cmp(&entries[b].id)));
    order
}

/// The `b` highest-scoring pool entries (whole pool when `b` exceeds it), by id.
pub fn select_top<S: Scalar>(pool: &[PoolEntry<S>], w: &[S], b: usize) -> Vec<usize> {
    rank_entries(pool, w).into_iter().take(b).map(|i| pool[i].id).collect()
}

/// A running active-learning session over an in-memory pool.
///
/// The session owns the model; its weights are the current `w`.
#[derive(Debug, Clone)]
pub struct ActiveSession<S> {
    model: EnsembleModel<S>,
    pool: Vec<PoolEntry<S>>,
    labeled_points: Vec<(usize, Vec<S>)>,
    store: LabeledStore<S>,
    learner: LearnerConfig,
    settings: SessionSettings,
    log: SessionLog,
    batches: usize,
    window: Option<usize>,
}

impl<S: Scalar> ActiveSession<S> {
    /// Starts a session, resetting the model weights to the configured
    /// initialization.
    pub fn new(mut model: EnsembleModel<S>, learner: LearnerConfig, settings: SessionSettings) -> Result<Self> {
        learner.validate()?;
        settings.validate()?;
        let w = initial_weights(model.n_leaves(), learner.init_mode, settings.seed);
        model.set_weights(w)?;
        Ok(ActiveSession {
            model,
            pool: Vec::new(),
            labeled_points: Vec::new(),
            store: LabeledStore::new(),
            learner,
            settings,
            log: SessionLog::default(),
            batches: 0,
            window: None,
        })
    }

    pub fn model(&self) -> &EnsembleModel<S> {
        &self.model
    }

    pub fn pool(&self) -> &[PoolEntry<S>] {
        &self.pool
    }

    pub fn store(&self) -> &LabeledStore<S> {
        &self.store
    }

    pub fn log(&self) -> &SessionLog {
        &self.log
    }

    pub fn log_mut(&mut self) -> &mut SessionLog {
        &mut self.log
    }

    pub fn into_log(self) -> SessionLog {
        self.log
    }

    pub fn settings(&self) -> &SessionSettings {
        &self.settings
    }

    pub fn learner(&self) -> &LearnerConfig {
        &self.learner
    }

    pub fn spent(&self) -> usize {
        self.log.len()
    }

    pub fn remaining_budget(&self) -> usize {
        self.settings.budget.saturating_sub(self.spent())
    }

    /// Features of every labeled instance, in labeling order.
    pub fn labeled_points(&self) -> &[(usize, Vec<S>)] {
        &self.labeled_points
    }

    pub fn set_window(&mut self, window: Option<usize>) {
        self.window = window;
    }

    pub fn score_of(&self, z: &SparseScoreVector<S>) -> S {
        z.score(self.model.weights())
    }

    /// Adds unlabeled instances to the pool.
    pub fn add_instances(&mut self, items: impl IntoIterator<Item = (usize, Vec<S>)>) -> Result<()> {
        let mut known: HashSet<usize> = self.pool.iter().map(|e| e.id).collect();
        for (id, x) in items {
            if self.store.contains(id) || !known.insert(id) {
                return Err(AadError::invalid(
                    "instance",
                    format!("id {id} is already in the session"),
                ));
            }
            let z = self.model.transform(&x, self.settings.normalize)?;
            self.pool.push(PoolEntry { id, x, z });
        }
        Ok(())
    }

    /// Replaces the pool, e.g. after merge-and-retain.
    pub fn set_pool(&mut self, pool: Vec<PoolEntry<S>>) {
        self.pool = pool;
    }

    pub fn take_pool(&mut self) -> Vec<PoolEntry<S>> {
        std::mem::take(&mut self.pool)
    }

    /// Swaps in an updated model and re-transforms every in-memory instance.
    pub fn replace_model(&mut self, model: EnsembleModel<S>) -> Result<()> {
        let normalize = self.settings.normalize;
        for e in &mut self.pool {
            e.z = model.transform(&e.x, normalize)?;
        }
        let points = &self.labeled_points;
        self.store.retransform(|id| {
            let x = points
                .iter()
                .find(|(i, _)| *i == id)
                .map(|(_, x)| x)
                .ok_or_else(|| AadError::invalid("store", format!("no features kept for id {id}")))?;
            model.transform(x, normalize)
        })?;
        self.model = model;
        Ok(())
    }

    pub fn ranked_pool(&self) -> Vec<usize> {
        rank_entries(&self.pool, self.model.weights())
    }

    /// Instance ids the strategy would query next, at most `k`.
    pub fn next_batch(&self, k: usize) -> Result<Vec<usize>> {
        let k = k.min(self.pool.len());
        if k == 0 {
            return Ok(Vec::new());
        }
        let w = self.model.weights();
        match self.settings.strategy {
            QueryStrategy::Top => Ok(select_top(&self.pool, w, k)),
            QueryStrategy::Diverse { candidates, delta } => {
                let top: Vec<Candidate<'_, S>> = self
                    .ranked_pool()
                    .into_iter()
                    .take(candidates.max(k))
                    .map(|i| {
                        let e = &self.pool[i];
                        Candidate {
                            id: e.id,
                            x: &e.x,
                            score: e.z.score(w),
                        }
                    })
                    .collect();
                select_diverse(&self.model, &top, k, delta)
            }
        }
    }

    /// Labels one pool instance and moves it to the store.
    pub fn record_label(&mut self, id: usize, label: Label) -> Result<()> {
        let pos = self
            .pool
            .iter()
            .position(|e| e.id == id)
            .ok_or_else(|| AadError::invalid("instance", format!("id {id} is not in the pool")))?;
        if self.store.contains(id) {
            return Err(AadError::AlreadyLabeled(id));
        }
        let entry = self.pool.remove(pos);
        let w = self.model.weights();
        if self.settings.record_weights {
            self.log.weight_snapshots.push(w.iter().map(|v| v.as_f64()).collect());
        }
        let cum = self.log.anomalies_found() + usize::from(label.is_anomaly());
        self.log.queries.push(QueryRecord {
            iter: self.log.len() + 1,
            instance_id: id,
            score: entry.z.score(w).as_f64(),
            label,
            cum_anomalies: cum,
            weight_hash: weight_hash(w),
            batch: self.batches,
            window: self.window,
        });
        self.store.insert(id, entry.z, label)?;
        self.labeled_points.push((id, entry.x));
        Ok(())
    }

    /// Ends a feedback batch, relearning the weights when enabled.
    pub fn finish_batch(&mut self) -> Result<()> {
        self.batches += 1;
        if self.settings.update_weights {
            self.relearn()?;
        }
        Ok(())
    }

    /// Refits `w` on the current store, anchored over pool plus store.
    pub fn relearn(&mut self) -> Result<()> {
        let population: Vec<&SparseScoreVector<S>> = self
            .pool
            .iter()
            .map(|e| &e.z)
            .chain(self.store.iter().map(|(_, z, _)| z))
            .collect();
        let out = learn_weights(&population, &self.store, &self.learner, self.model.weights())?;
        self.model.set_weights(out.weights)
    }

    /// Issues up to `queries` labels in batches, stopping early when the
    /// budget or the pool runs out. Returns the number of labels obtained.
    pub fn run(&mut self, oracle: &mut dyn LabelOracle, queries: usize) -> Result<usize> {
        let mut issued = 0;
        loop {
            let k = self
                .settings
                .batch_size
                .min(queries - issued)
                .min(self.remaining_budget());
            if k == 0 {
                break;
            }
            let batch = self.next_batch(k)?;
            if batch.is_empty() {
                break;
            }
            for id in batch {
                let label = oracle.label(id)?;
                self.record_label(id, label)?;
                issued += 1;
            }
            self.finish_batch()?;
        }
        Ok(issued)
    }
}

/// A session that stopped on an error; the log holds every query made before it.
#[derive(Debug, Error)]
#[error("session aborted after {} queries: {error}", log.len())]
pub struct Aborted {
    pub log: SessionLog,
    #[source]
    pub error: AadError,
}

/// Outcome of a completed batch session.
#[derive(Debug, Clone)]
pub struct BatchOutcome<S> {
    pub log: SessionLog,
    pub model: EnsembleModel<S>,
    pub store: LabeledStore<S>,
}

/// Greedy batch active learning over every instance of `data`, using the row
/// index as instance id.
pub fn batch_active_learn<S: Scalar>(
    model: &EnsembleModel<S>,
    data: &Dataset<S>,
    oracle: &mut dyn LabelOracle,
    learner: &LearnerConfig,
    settings: &SessionSettings,
) -> std::result::Result<BatchOutcome<S>, Aborted> {
    let abort = |error| Aborted {
        log: SessionLog::default(),
        error,
    };
    if settings.budget == 0 {
        return Err(abort(AadError::invalid("budget", "must be at least 1")));
    }
    let mut session = ActiveSession::new(model.clone(), *learner, *settings).map_err(abort)?;
    session
        .add_instances(data.points().iter().cloned().enumerate())
        .map_err(abort)?;
    match session.run(oracle, settings.budget) {
        Ok(_) => Ok(BatchOutcome {
            store: session.store.clone(),
            model: session.model,
            log: session.log,
        }),
        Err(error) => Err(Aborted {
            log: session.log,
            error,
        }),
    }
}
