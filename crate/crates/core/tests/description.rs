use aad_core::dataset::Dataset;
use aad_core::description::{
    build_cover_problem, describe_instance, select_diverse, solve_cover, solve_cover_exact, solve_cover_greedy,
    top_relevant_subspaces, Candidate, CoverProblem, Subspace,
};
use aad_core::ensemble::{EnsembleModel, ForestConfig};
use aad_core::Label;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_problem(rng: &mut ChaCha8Rng, dyadic: bool) -> CoverProblem<f64> {
    let k = rng.random_range(1..=15);
    let p = rng.random_range(1..=10);
    let density = rng.random_range(0.1..0.6);
    let membership: Vec<Vec<bool>> = (0..p)
        .map(|_| {
            let mut row: Vec<bool> = (0..k).map(|_| rng.random_bool(density)).collect();
            if !row.iter().any(|&b| b) {
                row[rng.random_range(0..k)] = true;
            }
            row
        })
        .collect();
    let costs = (0..k)
        .map(|_| {
            if dyadic {
                // multiples of 1/16 add exactly, so equal-cost optima are real ties
                rng.random_range(1..=16) as f64 / 16.0
            } else {
                rng.random_range(1e-3..1.0)
            }
        })
        .collect();
    CoverProblem::from_parts(membership, costs).unwrap()
}

/// Minimum cost over all 2^k subsets, and the lexicographically smallest
/// optimal column list.
fn brute_force(problem: &CoverProblem<f64>) -> (f64, Vec<usize>) {
    let k = problem.n_columns();
    let mut best = (f64::INFINITY, Vec::new());
    for mask in 1u32..(1 << k) {
        let cols: Vec<usize> = (0..k).filter(|j| mask >> j & 1 == 1).collect();
        if !problem.is_covered_by(&cols) {
            continue;
        }
        let cost: f64 = cols.iter().map(|&j| problem.costs[j]).sum();
        if cost < best.0 || (cost == best.0 && cols < best.1) {
            best = (cost, cols);
        }
    }
    best
}

fn harmonic(p: usize) -> f64 {
    (1..=p).map(|i| 1.0 / i as f64).sum()
}

#[test]
fn exact_cover_matches_enumeration_and_greedy_respects_harmonic_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..300 {
        let problem = random_problem(&mut rng, trial % 3 == 0);
        let (best, best_cols) = brute_force(&problem);
        let exact = solve_cover_exact(&problem).unwrap();
        assert!(problem.is_covered_by(&exact.columns));
        assert_eq!(exact.total_cost, best, "trial {trial}");
        if trial % 3 == 0 {
            assert_eq!(
                exact.columns, best_cols,
                "trial {trial}: tie not broken lexicographically"
            );
        }
        let greedy = solve_cover_greedy(&problem).unwrap();
        assert!(problem.is_covered_by(&greedy.columns));
        assert!(
            greedy.total_cost <= harmonic(problem.n_rows()) * best * (1.0 + 1e-12),
            "trial {trial}"
        );
    }
}

#[test]
fn single_row_cheapest_column() {
    let problem = CoverProblem::from_parts(vec![vec![true, true, true]], vec![0.5, 0.2, 0.9]).unwrap();
    assert_eq!(solve_cover_exact(&problem).unwrap().columns, vec![1]);
    assert_eq!(solve_cover_greedy(&problem).unwrap().columns, vec![1]);
}

fn two_clusters(seed: u64) -> Dataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for i in 0..400 {
        let (c, l) = match i % 40 {
            0 => ((6.0, 6.0), Label::Anomaly),
            1 => ((-6.0, 6.0), Label::Anomaly),
            _ => ((0.0, 0.0), Label::Nominal),
        };
        let spread = if l.is_anomaly() { 0.3 } else { 1.5 };
        points.push(vec![
            c.0 + rng.random_range(-spread..spread),
            c.1 + rng.random_range(-spread..spread),
        ]);
        labels.push(l);
    }
    Dataset::new(points, labels).unwrap()
}

fn model_for(data: &Dataset<f64>) -> EnsembleModel<f64> {
    EnsembleModel::build(data, ForestConfig::new(50, 128), 17).unwrap()
}

#[test]
fn memberships_match_pointwise_recomputation() {
    let data = two_clusters(1);
    let model = model_for(&data);
    let instances: Vec<(usize, &[f64])> = (0..10).map(|i| (i * 7, data.point(i * 7))).collect();
    let problem = build_cover_problem(&model, &instances, 5).unwrap();
    for (r, (_, x)) in instances.iter().enumerate() {
        let own = top_relevant_subspaces(&model, x, 5).unwrap();
        assert!(own.iter().all(|leaf| problem.columns.contains(leaf)));
        for (j, &leaf) in problem.columns.iter().enumerate() {
            let (tree, local) = model.locate_leaf(leaf).unwrap();
            let expected = model.tree(tree).leaf_for(x) == local;
            assert_eq!(problem.membership[r][j], expected);
        }
    }
    let cover = solve_cover(&problem).unwrap();
    assert!(problem.is_covered_by(&cover.columns));
}

#[test]
fn single_instance_problem_is_all_ones() {
    let data = two_clusters(2);
    let model = model_for(&data);
    let problem = build_cover_problem(&model, &[(0, data.point(0))], 5).unwrap();
    assert!(problem.n_columns() <= 5);
    assert!(problem.membership[0].iter().all(|&b| b));
    // the same point twice shares every column
    let twice = build_cover_problem(&model, &[(0, data.point(0)), (1, data.point(0))], 5).unwrap();
    assert_eq!(twice.n_columns(), 5);
}

#[test]
fn leaf_costs_lie_in_unit_interval() {
    let data = two_clusters(3);
    let model = model_for(&data);
    for leaf in 0..model.n_leaves() {
        let s = Subspace::of_leaf(&model, leaf).unwrap();
        assert!(s.cost > 0.0 && s.cost <= 1.0);
        for (&(lo, hi), &(a, b)) in s.bounds.iter().zip(model.tree(s.tree).sample_range()) {
            assert!(a <= lo && lo <= hi && hi <= b);
        }
    }
}

#[test]
fn descriptions_cover_the_queried_anomalies() {
    let data = two_clusters(4);
    let model = model_for(&data);
    let anomalies: Vec<(usize, &[f64])> = (0..data.len())
        .filter(|&i| data.hidden_labels()[i].is_anomaly())
        .map(|i| (i, data.point(i)))
        .collect();
    let problem = build_cover_problem(&model, &anomalies, 5).unwrap();
    let d = solve_cover(&problem).unwrap();
    assert!(problem.is_covered_by(&d.columns));
    assert!(d.selected.len() < anomalies.len());
    let exported = describe_instance(&model, anomalies[0].0, anomalies[0].1, 3).unwrap();
    assert_eq!(exported.len(), 3);
    assert!(exported.windows(2).all(|w| w[0].relevance >= w[1].relevance));
}

#[test]
fn diverse_selection_spans_at_least_as_many_regions_as_top() {
    let data = two_clusters(5);
    let model = model_for(&data);
    let zs = model.transform_all(data.points(), true).unwrap();
    let order = model.rank_instances(&zs).unwrap();
    let candidates: Vec<Candidate<'_, f64>> = order
        .iter()
        .take(10)
        .map(|&i| Candidate {
            id: i,
            x: data.point(i),
            score: model.score(&zs[i]).unwrap(),
        })
        .collect();
    let picked = select_diverse(&model, &candidates, 3, 5).unwrap();
    assert_eq!(picked[0], candidates[0].id);
    assert_eq!(select_diverse(&model, &candidates, 3, 5).unwrap(), picked);

    let instances: Vec<(usize, &[f64])> = candidates.iter().map(|c| (c.id, c.x)).collect();
    let problem = build_cover_problem(&model, &instances, 5).unwrap();
    let cover = solve_cover(&problem).unwrap();
    let spanned = |ids: &[usize]| {
        let rows: Vec<usize> = ids
            .iter()
            .map(|id| instances.iter().position(|(i, _)| i == id).unwrap())
            .collect();
        cover
            .columns
            .iter()
            .filter(|&&j| rows.iter().any(|&r| problem.membership[r][j]))
            .count()
    };
    let top: Vec<usize> = candidates.iter().take(3).map(|c| c.id).collect();
    assert!(spanned(&picked) >= spanned(&top));
}

#[test]
fn diverse_edge_cases() {
    let data = two_clusters(6);
    let model = model_for(&data);
    let candidates: Vec<Candidate<'_, f64>> = (0..4)
        .map(|i| Candidate {
            id: i,
            x: data.point(i),
            score: i as f64,
        })
        .collect();
    assert_eq!(select_diverse(&model, &candidates, 1, 5).unwrap(), vec![3]);
    assert_eq!(select_diverse(&model, &candidates, 9, 5).unwrap(), vec![3, 2, 1, 0]);
}

#[test]
fn disjoint_candidates_come_back_in_score_order() {
    // Hand-built 1D tree with one leaf per candidate.
    use aad_core::ensemble::{IsolationTree, Node};
    let leaf = |local_id, depth| Node::Leaf {
        local_id,
        depth,
        sample_count: 1,
    };
    let tree = IsolationTree::from_nodes(
        vec![
            Node::Internal {
                feature: 0,
                split: 1.0,
                left: 1,
                right: 2,
            },
            leaf(0, 1),
            Node::Internal {
                feature: 0,
                split: 2.0,
                left: 3,
                right: 4,
            },
            leaf(1, 2),
            leaf(2, 2),
        ],
        vec![(0.0, 3.0)],
    );
    let model = EnsembleModel::from_trees(vec![tree], ForestConfig::new(1, 3)).unwrap();
    let xs = [[0.5], [1.5], [2.5]];
    let candidates: Vec<Candidate<'_, f64>> = [(0, 0.3), (1, 0.9), (2, 0.6)]
        .iter()
        .map(|&(i, s)| Candidate {
            id: i,
            x: &xs[i],
            score: s,
        })
        .collect();
    assert_eq!(select_diverse(&model, &candidates, 2, 1).unwrap(), vec![1, 2]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relevance_order_ignores_positive_scaling(c in 1e-3f64..1e3, seed in any::<u64>()) {
        let data = two_clusters(7);
        let mut model = EnsembleModel::build(&data, ForestConfig::new(10, 64), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..model.n_leaves()).map(|_| rng.random_range(-1.0..1.0)).collect();
        model.set_weights(w.clone()).unwrap();
        let d = model.leaf_scores().to_vec();
        let argsort = |w: &[f64]| {
            let mut ids: Vec<usize> = (0..w.len()).collect();
            ids.sort_by(|&a, &b| (w[b] * d[b]).total_cmp(&(w[a] * d[a])).then(a.cmp(&b)));
            ids
        };
        let scaled: Vec<f64> = w.iter().map(|v| v * c).collect();
        prop_assert_eq!(argsort(&w), argsort(&scaled));
        let x = data.point((seed % 400) as usize);
        let before = top_relevant_subspaces(&model, x, 5).unwrap();
        // set_weights renormalizes, so the scaled vector gives the same model
        model.set_weights(scaled).unwrap();
        prop_assert_eq!(top_relevant_subspaces(&model, x, 5).unwrap(), before);
    }
}
