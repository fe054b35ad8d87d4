//! Monte Carlo harness: determinism across worker counts and suite order,
//! agreement with replication-level results, and failure accounting.

mod common;

use common::properties::{self, small_suite};

use synthcontrol::dgp::{ArConfig, DgpConfig, GroupedFactorConfig};
use synthcontrol::estimators::{EstimatorKind, EstimatorSpec};
use synthcontrol::montecarlo::{quantile_sorted, run_cell, run_replication, run_suite, CellSpec};
use synthcontrol::panel::{PredictorSpec, PredictorWeighting};
use synthcontrol::Error;

#[test]
fn summaries_are_bit_identical_across_worker_counts() {
    properties::summaries_are_bit_identical_across_worker_counts();
}

#[test]
fn suite_order_does_not_matter() {
    let suite = small_suite(20);
    let forward = run_suite(&suite, 2).unwrap();
    let mut reversed_suite = suite.clone();
    reversed_suite.reverse();
    let mut backward = run_suite(&reversed_suite, 3).unwrap();
    backward.reverse();
    assert_eq!(forward, backward);
    for (s, c) in forward.iter().zip(&suite) {
        assert_eq!(s.label, c.label);
    }
}

#[test]
fn summary_matches_replications() {
    let mut cell = CellSpec::new(
        "check",
        DgpConfig::GroupedFactor(GroupedFactorConfig::paired(10, 20, 0.5, 1.0)),
        EstimatorSpec::new(EstimatorKind::Standard, PredictorSpec::outcomes_only(PredictorWeighting::Unit)),
    );
    cell.replications = 300;
    cell.seed = 77;
    let s = run_cell(&cell, 0).unwrap();
    let reps: Vec<_> = (0..300).map(|r| run_replication(&cell, r).unwrap()).collect();
    let post: Vec<f64> = reps.iter().map(|r| r.post_rmse).collect();
    let mean = post.iter().sum::<f64>() / 300.0;
    let sd = (post.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 299.0).sqrt();
    assert!((s.post_rmse.mean - mean).abs() <= 1e-12);
    assert!((s.post_rmse.se - sd / 300f64.sqrt()).abs() <= 1e-12);
    let w2 = reps.iter().map(|r| r.w2).sum::<f64>() / 300.0;
    assert!((s.w2.as_ref().unwrap().mean - w2).abs() <= 1e-12);
    for t in [0, 19, 20, 29] {
        let mut col: Vec<f64> = reps.iter().map(|r| r.error_path[t]).collect();
        col.sort_by(f64::total_cmp);
        assert_eq!(s.band_lo[t], quantile_sorted(&col, 0.025));
        assert_eq!(s.band_hi[t], quantile_sorted(&col, 0.975));
        assert!(s.band_lo[t] <= s.error_mean[t] && s.error_mean[t] <= s.band_hi[t]);
    }
    assert_eq!((s.replications_completed, s.replications_failed), (300, 0));
    assert_eq!((s.n_donors, s.t0, s.sigma, s.rho), (19, 20, 1.0, Some(0.5)));
}

#[test]
fn w2_is_omitted_without_a_twin() {
    let mut ar = CellSpec::new(
        "ar",
        DgpConfig::Ar(ArConfig::default()),
        EstimatorSpec::new(EstimatorKind::Standard, PredictorSpec::outcomes_only(PredictorWeighting::Unit)),
    );
    ar.replications = 5;
    assert!(run_cell(&ar, 1).unwrap().w2.is_none());
    let mut unrestricted = CellSpec::new(
        "u",
        DgpConfig::GroupedFactor(GroupedFactorConfig::paired(10, 20, 0.5, 1.0)),
        EstimatorSpec::new(EstimatorKind::Unrestricted, PredictorSpec::outcomes_only(PredictorWeighting::Unit)),
    );
    unrestricted.replications = 5;
    assert!(run_cell(&unrestricted, 1).unwrap().w2.is_none());
}

#[test]
fn excessive_failures_abort_the_cell() {
    let mut spec = EstimatorSpec::new(EstimatorKind::Standard, PredictorSpec::outcomes_only(PredictorWeighting::Unit));
    spec.solver.max_iterations = 1;
    let mut cell = CellSpec::new("starved", DgpConfig::GroupedFactor(GroupedFactorConfig::paired(100, 20, 0.5, 1.0)), spec);
    cell.replications = 50;
    match run_cell(&cell, 1) {
        Err(e @ Error::Harness { .. }) => {
            let Error::Harness { cell, failed, attempted, .. } = &e else { unreachable!() };
            assert_eq!((cell.as_str(), *attempted), ("starved", 50));
            assert!(*failed > 0);
            assert!(e.to_string().contains("replications failed"));
        }
        other => panic!("{other:?}"),
    }
}
