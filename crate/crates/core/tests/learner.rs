use aad_core::dataset::Dataset;
use aad_core::ensemble::{EnsembleModel, ForestConfig, IsolationTree, Node, SparseScoreVector};
use aad_core::learner::{
    batch_active_learn, learn_weights, learn_weights_traced, objective, objective_gradient, rank_entries, select_top,
    tau_anchor, LabeledStore, LearnerConfig, PoolEntry, SessionSettings, TauAnchor,
};
use aad_core::log::weight_hash;
use aad_core::scalar::normalize_in_place;
use aad_core::{AadError, Label};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sparse(rng: &mut ChaCha8Rng, m: usize, nnz: usize) -> SparseScoreVector<f64> {
    let mut ids: Vec<usize> = rand::seq::index::sample(rng, m, nnz).into_iter().collect();
    ids.sort_unstable();
    SparseScoreVector::new(
        ids.into_iter().map(|i| (i, -rng.random_range(1.0..6.0))).collect(),
        false,
        0,
    )
}

fn unit(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut w: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= n);
    w
}

/// Every hinge margin of the objective at `w`, i.e. the distances to the kinks.
fn margins(w: &[f64], anchor: &TauAnchor<f64>, store: &LabeledStore<f64>) -> Vec<f64> {
    let tau = anchor.z_tau.dot(w);
    store
        .iter()
        .flat_map(|(_, z, _)| {
            let s = z.dot(w);
            [s - anchor.q_hat, s - tau]
        })
        .collect()
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-6;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 150 {
        attempts += 1;
        assert!(attempts < 5000, "too few configurations away from kinks");
        let m = rng.random_range(4..16);
        let nnz = rng.random_range(1..=m.min(5));
        let population: Vec<_> = (0..rng.random_range(5..20))
            .map(|_| random_sparse(&mut rng, m, nnz))
            .collect();
        let w_prev = unit(&mut rng, m);
        let anchor = tau_anchor(&population, &w_prev, rng.random_range(0.05..0.9)).unwrap();
        let mut store = LabeledStore::new();
        for id in 0..rng.random_range(1..8) {
            let label = if rng.random_bool(0.5) {
                Label::Anomaly
            } else {
                Label::Nominal
            };
            store.insert(id, random_sparse(&mut rng, m, nnz), label).unwrap();
        }
        let w = unit(&mut rng, m);
        let lambda = if rng.random_bool(0.3) {
            0.0
        } else {
            rng.random_range(0.0..1.0)
        };
        let w_unif = vec![1.0 / (m as f64).sqrt(); m];

        // Central differences move each score by at most h * |z|_1; require a
        // clear gap to every kink.
        if margins(&w, &anchor, &store).iter().any(|d| d.abs() < 1e-4) {
            continue;
        }
        let grad = objective_gradient(&w, &anchor, &store, lambda, &w_unif);
        let numeric: Vec<f64> = (0..m)
            .map(|i| {
                let mut up = w.clone();
                up[i] += h;
                let mut down = w.clone();
                down[i] -= h;
                (objective(&up, &anchor, &store, lambda, &w_unif) - objective(&down, &anchor, &store, lambda, &w_unif))
                    / (2.0 * h)
            })
            .collect();
        let diff = grad
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = numeric.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
        assert!(
            diff / scale < 1e-5,
            "relative error {} in configuration {checked}",
            diff / scale
        );
        checked += 1;
    }
}

#[test]
fn anchor_matches_full_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let population: Vec<_> = (0..20).map(|_| random_sparse(&mut rng, 12, 4)).collect();
        let w = unit(&mut rng, 12);
        let tau = rng.random_range(0.01..0.99);
        let anchor = tau_anchor(&population, &w, tau).unwrap();

        let mut scored: Vec<(f64, usize)> = population.iter().enumerate().map(|(i, z)| (z.score(&w), i)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let k = ((20.0 * tau).ceil() as usize).clamp(1, 20);
        assert_eq!(anchor.index, scored[k - 1].1);
        assert_eq!(anchor.q_hat, scored[k - 1].0);
        assert_eq!(anchor.z_tau, population[scored[k - 1].1]);
    }
}

#[test]
fn empty_store_keeps_uniform_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let population: Vec<_> = (0..10).map(|_| random_sparse(&mut rng, 8, 3)).collect();
    let w_unif = vec![1.0 / 8f64.sqrt(); 8];
    let out = learn_weights(&population, &LabeledStore::new(), &LearnerConfig::default(), &w_unif).unwrap();
    assert_eq!(out.weights, w_unif);
    assert_eq!(out.iterations, 0);
}

fn two_leaf(a: f64, b: f64) -> SparseScoreVector<f64> {
    SparseScoreVector::new(vec![(0, a), (1, b)], false, 0)
}

#[test]
fn two_leaf_objective_trace_never_increases() {
    // Small scores keep the optimum inside the region where both hinges are
    // active, so the objective is smooth along the whole path.
    let population = vec![
        two_leaf(-0.01, 0.0),
        two_leaf(0.0, -0.02),
        two_leaf(-0.005, -0.005),
        two_leaf(0.0, -0.03),
    ];
    let anomaly = two_leaf(0.0, -0.03);
    let mut store = LabeledStore::new();
    store.insert(9, anomaly.clone(), Label::Anomaly).unwrap();
    let u = 1.0 / 2f64.sqrt();
    let w0 = vec![u; 2];
    for prior in [true, false] {
        let config = LearnerConfig {
            tau: 0.25,
            prior_enabled: prior,
            ..LearnerConfig::default()
        };
        let out = learn_weights_traced(&population, &store, &config, &w0).unwrap();
        assert_eq!(out.trace.len(), out.iterations + 1);
        for pair in out.trace.windows(2) {
            assert!(pair[1] <= pair[0], "objective rose from {} to {}", pair[0], pair[1]);
        }
        assert!(out.trace.last().unwrap() < &out.trace[0]);
        assert!(anomaly.dot(&out.weights) > anomaly.dot(&w0));
        if prior {
            // Stationary point on the circle: the loss pushes along (-0.01, 0.06)
            // and the prior pulls towards u, so tan(theta) = (u - 0.06) / (u + 0.01).
            let theta = ((u - 0.06) / (u + 0.01)).atan();
            assert!((out.weights[0] - theta.cos()).abs() < 1e-3, "{:?}", out.weights);
            assert!((out.weights[1] - theta.sin()).abs() < 1e-3, "{:?}", out.weights);
        }
    }
}

#[test]
fn descent_stops_once_the_hinge_is_satisfied() {
    let population = vec![
        two_leaf(-1.0, 0.0),
        two_leaf(0.0, -2.0),
        two_leaf(-0.5, -0.5),
        two_leaf(0.0, -3.0),
    ];
    let mut store = LabeledStore::new();
    store.insert(9, two_leaf(0.0, -3.0), Label::Anomaly).unwrap();
    let config = LearnerConfig {
        tau: 0.25,
        prior_enabled: false,
        ..LearnerConfig::default()
    };
    let out = learn_weights_traced(&population, &store, &config, &[1.0 / 2f64.sqrt(); 2]).unwrap();
    assert!(out.iterations < config.max_iters);
    assert!(out.trace.windows(2).all(|p| p[1] <= p[0]));
}

fn two_blobs(n: usize, seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        if i % 20 == 0 {
            points.push(vec![rng.random_range(3.0..4.0), rng.random_range(3.0..4.0)]);
            labels.push(Label::Anomaly);
        } else {
            points.push(vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]);
            labels.push(Label::Nominal);
        }
    }
    Dataset::new(points, labels).unwrap()
}

fn oracle(data: &Dataset<f64>) -> impl FnMut(usize) -> aad_core::Result<Label> + '_ {
    move |id| Ok(data.hidden_labels()[id])
}

#[test]
fn replaying_the_log_reproduces_every_query() {
    let data = two_blobs(300, 3);
    let model = EnsembleModel::build(&data, ForestConfig::new(30, 128), 5).unwrap();
    let learner = LearnerConfig::default();
    let settings = SessionSettings {
        budget: 25,
        record_weights: true,
        ..SessionSettings::default()
    };
    let out = batch_active_learn(&model, &data, &mut oracle(&data), &learner, &settings).unwrap();
    assert_eq!(out.log.len(), 25);

    let zs = model.transform_all(data.points(), true).unwrap();
    // the session stores weights through set_weights, which renormalizes
    let mut w = model.uniform_weights();
    normalize_in_place(&mut w);
    let mut store = LabeledStore::new();
    let mut pool: Vec<PoolEntry<f64>> = zs
        .iter()
        .enumerate()
        .map(|(id, z)| PoolEntry {
            id,
            x: data.point(id).to_vec(),
            z: z.clone(),
        })
        .collect();
    for (step, record) in out.log.queries.iter().enumerate() {
        assert_eq!(record.weight_hash, weight_hash(&w));
        assert_eq!(out.log.weight_snapshots[step], w);
        // the queried id is the unlabeled argmax (ties to the lower id)
        let best = pool
            .iter()
            .max_by(|a, b| a.z.score(&w).total_cmp(&b.z.score(&w)).then(b.id.cmp(&a.id)))
            .unwrap();
        assert_eq!(record.instance_id, best.id);
        assert_eq!(record.label, data.hidden_labels()[best.id]);
        let pos = pool.iter().position(|e| e.id == best.id).unwrap();
        let entry = pool.remove(pos);
        store.insert(entry.id, entry.z, record.label).unwrap();
        let population: Vec<&SparseScoreVector<f64>> = pool
            .iter()
            .map(|e| &e.z)
            .chain(store.iter().map(|(_, z, _)| z))
            .collect();
        w = learn_weights(&population, &store, &learner, &w).unwrap().weights;
        normalize_in_place(&mut w);
    }
    assert_eq!(w, out.model.weights());
}

#[test]
fn bookkeeping_tracks_spent_budget() {
    let data = two_blobs(200, 8);
    let model = EnsembleModel::build(&data, ForestConfig::new(20, 64), 1).unwrap();
    for batch_size in [1, 3, 4] {
        let settings = SessionSettings {
            budget: 13,
            batch_size,
            ..SessionSettings::default()
        };
        let out = batch_active_learn(&model, &data, &mut oracle(&data), &LearnerConfig::default(), &settings).unwrap();
        assert_eq!(out.log.len(), 13);
        assert_eq!(out.store.len(), 13);
        assert_eq!(out.store.positives().len() + out.store.negatives().len(), 13);
        let mut ids = out.log.queried_ids();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 13, "an instance was queried twice");
        let cum: Vec<usize> = out.log.queries.iter().map(|r| r.cum_anomalies).collect();
        assert!(cum.windows(2).all(|p| p[1] >= p[0]));
        // one relearn per batch
        assert_eq!(out.log.queries.last().unwrap().batch, 12 / batch_size);
    }
}

#[test]
fn pool_shrinks_by_one_per_query() {
    use aad_core::learner::ActiveSession;
    let data = two_blobs(120, 4);
    let model = EnsembleModel::build(&data, ForestConfig::new(10, 64), 1).unwrap();
    let mut session = ActiveSession::new(model, LearnerConfig::default(), SessionSettings::default()).unwrap();
    session
        .add_instances(data.points().iter().cloned().enumerate())
        .unwrap();
    let mut orc = oracle(&data);
    for step in 1..=10 {
        assert_eq!(session.run(&mut orc, 1).unwrap(), 1);
        assert_eq!(session.pool().len(), 120 - step);
        assert_eq!(session.store().len(), step);
    }
}

#[test]
fn budget_of_one_queries_the_unsupervised_argmax() {
    let data = two_blobs(200, 2);
    let model = EnsembleModel::build(&data, ForestConfig::new(20, 64), 9).unwrap();
    let settings = SessionSettings {
        budget: 1,
        ..SessionSettings::default()
    };
    let out = batch_active_learn(&model, &data, &mut oracle(&data), &LearnerConfig::default(), &settings).unwrap();
    let zs = model.transform_all(data.points(), true).unwrap();
    assert_eq!(out.log.queried_ids(), vec![model.rank_instances(&zs).unwrap()[0]]);
}

#[test]
fn nominal_only_oracle_finds_nothing() {
    let data = two_blobs(100, 2);
    let model = EnsembleModel::build(&data, ForestConfig::new(10, 64), 9).unwrap();
    let mut all_nominal = |_| Ok(Label::Nominal);
    let out = batch_active_learn(
        &model,
        &data,
        &mut all_nominal,
        &LearnerConfig::default(),
        &SessionSettings {
            budget: 15,
            ..SessionSettings::default()
        },
    )
    .unwrap();
    assert!(out.log.queries.iter().all(|r| r.cum_anomalies == 0));
}

#[test]
fn oracle_failure_keeps_partial_log() {
    let data = two_blobs(100, 2);
    let model = EnsembleModel::build(&data, ForestConfig::new(10, 64), 9).unwrap();
    let mut calls = 0;
    let mut flaky = |id| {
        calls += 1;
        if calls > 4 {
            Err(AadError::Oracle {
                id,
                reason: "analyst went home".into(),
            })
        } else {
            Ok(Label::Nominal)
        }
    };
    let err = batch_active_learn(
        &model,
        &data,
        &mut flaky,
        &LearnerConfig::default(),
        &SessionSettings::default(),
    )
    .unwrap_err();
    assert_eq!(err.log.len(), 4);
    assert!(matches!(err.error, AadError::Oracle { .. }));
}

#[test]
fn depth_three_leaf_scores_minus_three() {
    let leaf = |local_id, depth| Node::Leaf {
        local_id,
        depth,
        sample_count: 1,
    };
    let split = |feature, split, left, right| Node::Internal {
        feature,
        split,
        left,
        right,
    };
    let tree = IsolationTree::from_nodes(
        vec![
            split(0, 0.5, 1, 2),
            leaf(0, 1),
            split(1, 0.5, 3, 4),
            leaf(1, 2),
            split(0, 0.75, 5, 6),
            leaf(2, 3),
            leaf(3, 3),
        ],
        vec![(0.0, 1.0), (0.0, 1.0)],
    );
    let model = EnsembleModel::from_trees(vec![tree], ForestConfig::new(1, 4)).unwrap();
    let z = model.transform(&[0.6, 0.9], false).unwrap();
    assert_eq!(z.entries(), &[(2, -3.0)]);
}

fn pool_of(scores: &[f64]) -> Vec<PoolEntry<f64>> {
    scores
        .iter()
        .enumerate()
        .map(|(id, &s)| PoolEntry {
            id,
            x: vec![s],
            z: SparseScoreVector::new(vec![(0, s)], false, 0),
        })
        .collect()
}

proptest! {
    #[test]
    fn select_top_matches_sort_oracle(
        scores in prop::collection::vec(prop::sample::select(vec![-2.0, -1.0, -0.5, 0.0, 0.25, 1.0]), 1..40),
        b in 1usize..50,
    ) {
        let pool = pool_of(&scores);
        let mut oracle: Vec<usize> = (0..scores.len()).collect();
        oracle.sort_by(|&a, &c| scores[c].total_cmp(&scores[a]).then(a.cmp(&c)));
        prop_assert_eq!(rank_entries(&pool, &[1.0]), oracle.clone());
        oracle.truncate(b);
        prop_assert_eq!(select_top(&pool, &[1.0], b), oracle);
    }
}
