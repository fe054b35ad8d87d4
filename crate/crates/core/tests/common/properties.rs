//! Property checks shared by the module tests and the acceptance run.
//! Each panics with a description on the first violation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use synthcontrol::config::RunConfig;
use synthcontrol::estimators::{estimate, estimate_constant_shift, estimate_standard, EstimatorKind, EstimatorSpec};
use synthcontrol::evaluation::backdate;
use synthcontrol::montecarlo::{run_suite, CellSpec};
use synthcontrol::panel::{build_predictors, PredictorSet, PredictorSpec, PredictorWeighting, WeightVector};
use synthcontrol::solver::{duality_gap, objective_value, solve_simplex_ls, SolverConfig};

use super::{grid_oracle, random_instance, random_panel};

fn solve(p: &PredictorSet) -> WeightVector {
    solve_simplex_ls(p, &SolverConfig::default()).unwrap()
}

fn unit() -> PredictorSpec {
    PredictorSpec::outcomes_only(PredictorWeighting::Unit)
}

fn spec(kind: EstimatorKind) -> EstimatorSpec {
    EstimatorSpec::new(kind, unit())
}

/// A reduced copy of the built-in suite.
pub fn small_suite(reps: usize) -> Vec<CellSpec> {
    RunConfig::table_a1()
        .with_overrides(Some(reps), Some(3))
        .cell_specs()
        .into_iter()
        .filter(|c| c.dgp.n_donors() < 500)
        .collect()
}

pub fn random_small_instances_match_grid() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 100 {
        let k = rng.random_range(1..=3);
        let j = rng.random_range(2..=4);
        let p = random_instance(&mut rng, k, j, 2.5);
        let (grid_w, grid_obj) = grid_oracle(&p);
        let w = solve(&p);
        let obj = objective_value(&p, &w).unwrap();
        assert!(obj <= grid_obj + 1e-9, "solver {obj} worse than grid {grid_obj}");
        // Coordinates are only identified when x1 is outside the hull.
        if grid_obj > 1e-2 {
            for (a, b) in w.w.iter().zip(&grid_w) {
                assert!((a - b).abs() <= 2e-3, "k={k} J={j}: {:?} vs grid {:?}", w.w, grid_w);
            }
            checked += 1;
        }
    }
}

pub fn sparsity_outside_hull() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 100 {
        let k = rng.random_range(1..=3);
        let j = rng.random_range(k + 1..=4.max(k + 1));
        let p = random_instance(&mut rng, k, j, 3.0);
        let (_, grid_obj) = grid_oracle(&p);
        if grid_obj <= 1e-2 {
            continue;
        }
        let w = solve(&p);
        assert!(w.nonzero_count(1e-9) <= k, "k={k}: {:?}", w.w);
        checked += 1;
    }
}

pub fn duality_gap_certificate_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let k = rng.random_range(1..=10);
        let j = rng.random_range(2..=50);
        let spread = rng.random_range(0.0..3.0);
        let p = random_instance(&mut rng, k, j, spread);
        let w = solve(&p);
        assert!(w.is_feasible());
        assert!((w.w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let f = objective_value(&p, &w).unwrap().powi(2);
        let gap = duality_gap(&p, &w).unwrap();
        assert!(gap <= 1e-6 * (1.0 + f), "gap {gap} at f {f} (k={k}, J={j})");
    }
}

pub fn constant_shift_is_standard_on_demeaned_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let j = rng.random_range(2..=15);
        let t0 = rng.random_range(2..=15);
        let p = random_panel(&mut rng, j, t0, t0 + 5);
        let shift = estimate_constant_shift(&p, &unit(), &SolverConfig::default()).unwrap();
        let d = p.demeaned();
        let pred = build_predictors(&d, None, &unit()).unwrap();
        let standard = estimate_standard(&d, &pred, &SolverConfig::default()).unwrap();
        assert_eq!(shift.weights.w, standard.weights.w);
        for (a, b) in shift.effect.iter().zip(&standard.effect) {
            assert!((a - b).abs() <= 1e-10);
        }
        let alpha = p.pre_mean(0) - (0..j).map(|c| shift.weights.w[c] * p.pre_mean(c + 1)).sum::<f64>();
        assert!((shift.weights.intercept.unwrap() - alpha).abs() <= 1e-12);
    }
}

pub fn fit_improves_as_constraints_are_relaxed() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..1000 {
        let j = rng.random_range(1..=12);
        let t0 = rng.random_range(2..=15);
        let p = random_panel(&mut rng, j, t0, t0 + 3);
        let pre = |kind| estimate(&p, None, &spec(kind)).unwrap().pre_rmse;
        let (s, c, u) = (
            pre(EstimatorKind::Standard),
            pre(EstimatorKind::ConstantShift),
            pre(EstimatorKind::Unrestricted),
        );
        let slack = 1e-7 * (1.0 + s);
        assert!(u <= c + slack && c <= s + slack, "unrestricted {u}, shift {c}, standard {s}");
    }
}

pub fn post_period_data_never_reaches_the_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(28);
    for kind in [EstimatorKind::Standard, EstimatorKind::ConstantShift, EstimatorKind::Unrestricted] {
        for _ in 0..50 {
            let p = random_panel(&mut rng, 10, 8, 14);
            let before = estimate(&p, None, &spec(kind)).unwrap();
            let mut mutated = p.clone();
            for u in 0..p.n_units() {
                for t in 8..14 {
                    mutated = mutated.with_outcome(u, t, rng.random_range(-1e3..1e3)).unwrap();
                }
            }
            let after = estimate(&mutated, None, &spec(kind)).unwrap();
            assert_eq!(before.weights, after.weights);
            assert_eq!(before.pre_rmse, after.pre_rmse);

            let b0 = backdate(&p, None, &spec(kind), 5).unwrap();
            let mut hidden = p.clone();
            for u in 0..p.n_units() {
                for t in 5..14 {
                    hidden = hidden.with_outcome(u, t, rng.random_range(-1e3..1e3)).unwrap();
                }
            }
            let b1 = backdate(&hidden, None, &spec(kind), 5).unwrap();
            assert_eq!(b0.weights_backdated, b1.weights_backdated);
            assert_eq!(b0.fit_rmse, b1.fit_rmse);
        }
    }
}

pub fn summaries_are_bit_identical_across_worker_counts() {
    let suite = small_suite(40);
    assert!(suite.len() > 20);
    let runs: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&w| serde_json::to_string(&run_suite(&suite, w).unwrap()).unwrap())
        .collect();
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
}
