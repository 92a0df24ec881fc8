use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use aad_core::dataset::Dataset;
use aad_core::description::{describe_instance, SubspaceExport, DEFAULT_DELTA};
use aad_core::ensemble::{EnsembleModel, ForestConfig};
use aad_core::learner::{ActiveSession, LearnerConfig, QueryStrategy, SessionSettings};
use aad_core::log::{weight_hash, DriftReport, SessionLog};
use aad_core::rank::mix_seed;
use aad_core::Label;
use aad_harness::{anomalies_seen_curve, DataSource};
use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

/// Instances listed in the metrics payload.
pub const TOP_K: usize = 10;

/// Everything needed to rebuild a session from scratch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub data: DataSource,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default = "top")]
    pub strategy: QueryStrategy,
    #[serde(default = "one")]
    pub batch_size: usize,
    #[serde(default = "sixty")]
    pub budget: usize,
    /// Seeds the forest and any random weight initialization.
    #[serde(default)]
    pub seed: u64,
    /// Subspaces shown with each query.
    #[serde(default = "delta")]
    pub delta: usize,
}

fn top() -> QueryStrategy {
    QueryStrategy::Top
}
fn one() -> usize {
    1
}
fn sixty() -> usize {
    60
}
fn delta() -> usize {
    DEFAULT_DELTA
}

impl SessionConfig {
    pub fn new(data: DataSource) -> Self {
        SessionConfig {
            data,
            forest: ForestConfig::default(),
            learner: LearnerConfig::default(),
            strategy: QueryStrategy::Top,
            batch_size: 1,
            budget: 60,
            seed: 0,
            delta: DEFAULT_DELTA,
        }
    }

    fn settings(&self) -> SessionSettings {
        SessionSettings {
            budget: self.budget,
            batch_size: self.batch_size,
            strategy: self.strategy,
            seed: mix_seed(self.seed, 1),
            ..SessionSettings::default()
        }
    }
}

/// One line of a session's append-only event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Event {
    Created {
        config: SessionConfig,
    },
    Label {
        seq: usize,
        instance_id: usize,
        label: Label,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryPayload {
    pub instance_id: usize,
    pub score: f64,
    pub features: Vec<f64>,
    pub subspaces: Vec<SubspaceExport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredInstance {
    pub instance_id: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsPayload {
    pub queries_spent: usize,
    pub budget_remaining: usize,
    pub anomalies_confirmed: usize,
    /// Cumulative anomalies after each label.
    pub curve: Vec<f64>,
    /// Best-scoring unlabeled instances under the current weights.
    pub top: Vec<ScoredInstance>,
    pub last_drift: Option<DriftReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub config: SessionConfig,
    pub queries_spent: usize,
    pub budget_remaining: usize,
    pub batches_completed: usize,
    pub pending: Vec<usize>,
    pub weight_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceDescription {
    pub instance_id: usize,
    pub subspaces: Vec<SubspaceExport>,
}

/// A batch active-learning session driven by analyst labels.
///
/// Labels arrive one at a time; weights are refit once the whole pending
/// batch is labeled, and the next batch is drawn from the refit model.
#[derive(Debug)]
pub struct Session {
    id: String,
    config: SessionConfig,
    data: Dataset<f64>,
    active: ActiveSession<f64>,
    pending: Vec<usize>,
    batches: usize,
    events: Vec<Event>,
    log_path: Option<PathBuf>,
}

impl Session {
    /// Builds the model and the first query batch. Nothing is written to disk.
    pub fn create(id: impl Into<String>, config: SessionConfig) -> Result<Self> {
        if config.budget == 0 {
            return Err(ServiceError::BadRequest("budget must be at least 1".into()));
        }
        if config.delta == 0 {
            return Err(ServiceError::BadRequest("delta must be at least 1".into()));
        }
        let data = config.data.load()?;
        let model = EnsembleModel::build(&data, config.forest, config.seed)?;
        let mut active = ActiveSession::new(model, config.learner, config.settings())?;
        active.add_instances(data.points().iter().cloned().enumerate())?;
        let mut session = Session {
            id: id.into(),
            events: vec![Event::Created { config: config.clone() }],
            config,
            data,
            active,
            pending: Vec::new(),
            batches: 0,
            log_path: None,
        };
        session.draw_batch()?;
        Ok(session)
    }

    /// Rebuilds a session by applying a recorded event log.
    pub fn replay(id: impl Into<String>, events: &[Event]) -> Result<Self> {
        let Some(Event::Created { config }) = events.first() else {
            return Err(ServiceError::Corrupt("log does not start with a creation event".into()));
        };
        let mut session = Session::create(id, config.clone())?;
        for event in &events[1..] {
            match event {
                Event::Label {
                    seq,
                    instance_id,
                    label,
                } => {
                    if *seq != session.queries_spent() {
                        return Err(ServiceError::Corrupt(format!("label event {seq} is out of order")));
                    }
                    session.submit_label(*instance_id, *label)?;
                }
                Event::Created { .. } => return Err(ServiceError::Corrupt("second creation event".into())),
            }
        }
        Ok(session)
    }

    /// Loads `events.jsonl` from `dir` and keeps appending to it.
    pub fn load(id: impl Into<String>, dir: &Path) -> Result<Self> {
        let path = dir.join(EVENTS_FILE);
        let events = read_events(&path)?;
        let mut session = Session::replay(id, &events)?;
        session.log_path = Some(path);
        Ok(session)
    }

    /// Writes the log so far to `dir/events.jsonl` and appends every later event.
    pub fn persist_to(&mut self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let path = dir.join(EVENTS_FILE);
        let mut file = File::create(&path)?;
        for event in &self.events {
            writeln!(file, "{}", serde_json::to_string(event)?)?;
        }
        file.sync_data()?;
        self.log_path = Some(path);
        Ok(())
    }

    fn draw_batch(&mut self) -> Result<()> {
        let k = self.config.batch_size.min(self.active.remaining_budget());
        self.pending = self.active.next_batch(k)?;
        Ok(())
    }

    /// Records an analyst label for a pending instance.
    ///
    /// The event is on disk before the session changes. Completing the batch
    /// refits the weights and draws the next batch.
    pub fn submit_label(&mut self, instance_id: usize, label: Label) -> Result<()> {
        if self.active.store().contains(instance_id) {
            return Err(ServiceError::AlreadyLabeled(instance_id));
        }
        if !self.pending.contains(&instance_id) {
            return Err(ServiceError::NotPending(instance_id));
        }
        let event = Event::Label {
            seq: self.queries_spent(),
            instance_id,
            label,
        };
        if let Some(path) = &self.log_path {
            let mut file = OpenOptions::new().append(true).open(path)?;
            writeln!(file, "{}", serde_json::to_string(&event)?)?;
            file.sync_data()?;
        }
        self.events.push(event);
        self.active.record_label(instance_id, label)?;
        self.pending.retain(|&p| p != instance_id);
        if self.pending.is_empty() {
            self.active.finish_batch()?;
            self.batches += 1;
            self.draw_batch()?;
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn data(&self) -> &Dataset<f64> {
        &self.data
    }

    pub fn model(&self) -> &EnsembleModel<f64> {
        self.active.model()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn log(&self) -> &SessionLog {
        self.active.log()
    }

    pub fn pending(&self) -> &[usize] {
        &self.pending
    }

    pub fn queries_spent(&self) -> usize {
        self.active.spent()
    }

    pub fn weight_hash(&self) -> String {
        weight_hash(self.active.model().weights())
    }

    fn score(&self, id: usize) -> f64 {
        // pending and top-k ids always come from the pool
        self.active
            .pool()
            .iter()
            .find(|e| e.id == id)
            .map_or(f64::NAN, |e| self.active.score_of(&e.z))
    }

    pub fn pending_queries(&self) -> Result<Vec<QueryPayload>> {
        self.pending
            .iter()
            .map(|&id| {
                let x = self.data.point(id);
                Ok(QueryPayload {
                    instance_id: id,
                    score: self.score(id),
                    features: x.to_vec(),
                    subspaces: describe_instance(self.model(), id, x, self.config.delta)?,
                })
            })
            .collect()
    }

    pub fn describe(&self, ids: &[usize]) -> Result<Vec<InstanceDescription>> {
        ids.iter()
            .map(|&id| {
                if id >= self.data.len() {
                    return Err(ServiceError::UnknownInstance(id));
                }
                Ok(InstanceDescription {
                    instance_id: id,
                    subspaces: describe_instance(self.model(), id, self.data.point(id), self.config.delta)?,
                })
            })
            .collect()
    }

    pub fn metrics(&self) -> MetricsPayload {
        let pool = self.active.pool();
        let top = self
            .active
            .ranked_pool()
            .into_iter()
            .take(TOP_K)
            .map(|i| ScoredInstance {
                instance_id: pool[i].id,
                score: self.active.score_of(&pool[i].z),
            })
            .collect();
        MetricsPayload {
            queries_spent: self.queries_spent(),
            budget_remaining: self.active.remaining_budget(),
            anomalies_confirmed: self.log().anomalies_found(),
            curve: anomalies_seen_curve(self.log(), None),
            top,
            last_drift: self.log().drift.last().cloned(),
        }
    }

    pub fn summary(&self) -> SessionSummary {
        SessionSummary {
            id: self.id.clone(),
            config: self.config.clone(),
            queries_spent: self.queries_spent(),
            budget_remaining: self.active.remaining_budget(),
            batches_completed: self.batches,
            pending: self.pending.clone(),
            weight_hash: self.weight_hash(),
        }
    }
}

pub const EVENTS_FILE: &str = "events.jsonl";

pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let mut events = Vec::new();
    for (n, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event = serde_json::from_str(&line)
            .map_err(|e| ServiceError::Corrupt(format!("{}:{}: {e}", path.display(), n + 1)))?;
        events.push(event);
    }
    Ok(events)
}
