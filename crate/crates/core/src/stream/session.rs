use serde::{Deserialize, Serialize};

use super::drift::{update_model, DriftState, UpdateMode};
use crate::dataset::Dataset;
use crate::ensemble::{EnsembleModel, ForestConfig};
use crate::error::{AadError, Result};
use crate::learner::{
    rank_entries, Aborted, ActiveSession, LabelOracle, LambdaMode, LearnerConfig, PoolEntry, SessionSettings,
};
use crate::log::{DriftReport, SessionLog};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamConfig {
    pub window_size: usize,
    pub queries_per_window: usize,
    pub budget: usize,
    pub alpha_kl: f64,
    pub n_reps: usize,
    /// Leaf smoothing in probability units; `None` means `1 / (2 |X|)`.
    pub smoothing_eps: Option<f64>,
    pub update_mode: UpdateMode,
    pub seed: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            window_size: 512,
            queries_per_window: 20,
            budget: 60,
            alpha_kl: 0.05,
            n_reps: 10,
            smoothing_eps: None,
            update_mode: UpdateMode::KlAdaptive,
            seed: 0,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size == 0 {
            return Err(AadError::invalid("window_size", "must be at least 1"));
        }
        if self.queries_per_window > self.budget {
            return Err(AadError::invalid("queries_per_window", "exceeds the total budget"));
        }
        if !(self.alpha_kl > 0.0 && self.alpha_kl < 1.0) {
            return Err(AadError::invalid(
                "alpha_kl",
                format!("{} is outside (0, 1)", self.alpha_kl),
            ));
        }
        Ok(())
    }
}

/// Unlabeled instances kept in memory between windows.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBuffer<S> {
    pub capacity: usize,
    pub entries: Vec<PoolEntry<S>>,
}

/// Keeps the `capacity` highest-scoring instances of `buffer` and `incoming`
/// under `w`, in rank order (ties to the lower id).
pub fn merge_and_retain<S: Scalar>(
    buffer: Vec<PoolEntry<S>>,
    incoming: Vec<PoolEntry<S>>,
    w: &[S],
    capacity: usize,
) -> WindowBuffer<S> {
    let mut all = buffer;
    all.extend(incoming);
    let order = rank_entries(&all, w);
    let mut slots: Vec<Option<PoolEntry<S>>> = all.into_iter().map(Some).collect();
    let entries = order
        .into_iter()
        .take(capacity)
        .map(|i| slots[i].take().expect("each position ranked once"))
        .collect();
    WindowBuffer { capacity, entries }
}

#[derive(Debug, Clone)]
pub struct StreamOutcome<S> {
    pub log: SessionLog,
    pub model: EnsembleModel<S>,
    pub state: DriftState,
}

/// Windowed active learning with drift-driven model updates.
///
/// The first window builds the model and drift state. Every window is
/// merged into the buffer and followed by up to `queries_per_window` labels;
/// after the last window the buffer is queried until the budget is spent.
/// Weights are learned with the constant one-half prior strength.
pub fn stream_active_learn<S, I>(
    windows: I,
    forest: ForestConfig,
    config: &StreamConfig,
    oracle: &mut dyn LabelOracle,
    learner: &LearnerConfig,
    settings: &SessionSettings,
) -> std::result::Result<StreamOutcome<S>, Aborted>
where
    S: Scalar,
    I: IntoIterator<Item = Vec<(usize, Vec<S>)>>,
{
    let mut log = SessionLog::default();
    let mut session: Option<ActiveSession<S>> = None;
    let mut state: Option<DriftState> = None;
    let result = run_stream(
        windows,
        forest,
        config,
        oracle,
        learner,
        settings,
        &mut session,
        &mut state,
    );
    if let Some(s) = &session {
        log = s.log().clone();
    }
    match (result, session, state) {
        (Ok(()), Some(s), Some(state)) => Ok(StreamOutcome {
            model: s.model().clone(),
            log: s.into_log(),
            state,
        }),
        (Ok(()), _, _) => Err(Aborted {
            log,
            error: AadError::EmptyDataset,
        }),
        (Err(error), _, _) => Err(Aborted { log, error }),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_stream<S, I>(
    windows: I,
    forest: ForestConfig,
    config: &StreamConfig,
    oracle: &mut dyn LabelOracle,
    learner: &LearnerConfig,
    settings: &SessionSettings,
    session: &mut Option<ActiveSession<S>>,
    state: &mut Option<DriftState>,
) -> Result<()>
where
    S: Scalar,
    I: IntoIterator<Item = Vec<(usize, Vec<S>)>>,
{
    config.validate()?;
    let learner = LearnerConfig {
        lambda_mode: LambdaMode::ConstantHalf,
        ..*learner
    };
    let settings = SessionSettings {
        budget: config.budget,
        ..*settings
    };
    for (index, window) in windows.into_iter().enumerate() {
        if window.is_empty() {
            return Err(AadError::EmptyDataset);
        }
        let points: Vec<Vec<S>> = window.iter().map(|(_, x)| x.clone()).collect();
        let report = match (session.as_mut(), state.as_mut()) {
            (Some(s), Some(st)) => {
                let update = update_model(
                    s.model(),
                    st,
                    &points,
                    config.update_mode,
                    config.smoothing_eps,
                    config.seed,
                    index,
                )?;
                let report = DriftReport {
                    window_index: index,
                    n_drifted: update.n_drifted,
                    n_replaced: update.replaced.len(),
                    q_kl: update.state.q_kl,
                };
                if !update.replaced.is_empty() {
                    s.replace_model(update.model)?;
                }
                *st = update.state;
                report
            }
            _ => {
                let model = EnsembleModel::build(&Dataset::unlabeled(points.clone())?, forest, config.seed)?;
                let st = DriftState::fit(
                    &model,
                    &points,
                    config.alpha_kl,
                    config.n_reps,
                    config.smoothing_eps,
                    crate::rank::mix_seed(config.seed, 1),
                )?;
                let report = DriftReport {
                    window_index: index,
                    n_drifted: 0,
                    n_replaced: 0,
                    q_kl: st.q_kl,
                };
                *session = Some(ActiveSession::new(model, learner, settings)?);
                *state = Some(st);
                report
            }
        };
        let s = session.as_mut().expect("session exists after the first window");
        s.log_mut().drift.push(report);
        s.set_window(Some(index));

        let normalize = s.settings().normalize;
        let incoming = window
            .into_iter()
            .map(|(id, x)| {
                let z = s.model().transform(&x, normalize)?;
                Ok(PoolEntry { id, x, z })
            })
            .collect::<Result<Vec<_>>>()?;
        let buffer = merge_and_retain(s.take_pool(), incoming, s.model().weights(), config.window_size);
        s.set_pool(buffer.entries);
        s.run(oracle, config.queries_per_window)?;
    }
    if let Some(s) = session.as_mut() {
        let remaining = s.remaining_budget();
        s.run(oracle, remaining)?;
    }
    Ok(())
}
