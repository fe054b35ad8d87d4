//! Standard synthetic control, the constant-shift variant, unrestricted
//! regression, and nearest-neighbour trimming of the donor pool.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_norm_lstsq;
use crate::panel::{build_predictors, Covariates, EstimationResult, Panel, PredictorSet, PredictorSpec, WeightVector};
use crate::solver::{solve_simplex_ls, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    #[default]
    Standard,
    #[serde(alias = "shift")]
    ConstantShift,
    Unrestricted,
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            EstimatorKind::Standard => "standard",
            EstimatorKind::ConstantShift => "constant_shift",
            EstimatorKind::Unrestricted => "unrestricted",
        })
    }
}

/// How many donors survive trimming.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrimSpec {
    KeepCount(usize),
    /// Fraction of the pool, rounded to the nearest count (at least one).
    KeepFraction(f64),
}

impl TrimSpec {
    pub fn keep_count(&self, n_donors: usize) -> Result<usize> {
        let keep = match *self {
            TrimSpec::KeepCount(n) => n,
            TrimSpec::KeepFraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::invalid(format!("trim fraction {f} is outside (0, 1]")));
                }
                ((f * n_donors as f64).round() as usize).max(1)
            }
        };
        if keep == 0 || keep > n_donors {
            return Err(Error::invalid(format!(
                "cannot keep {keep} donors out of a pool of {n_donors}"
            )));
        }
        Ok(keep)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub kind: EstimatorKind,
    #[serde(default)]
    pub trim: Option<TrimSpec>,
    #[serde(default)]
    pub predictors: PredictorSpec,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind, predictors: PredictorSpec) -> Self {
        EstimatorSpec {
            kind,
            trim: None,
            predictors,
            solver: SolverConfig::default(),
        }
    }

    pub fn with_trim(mut self, trim: TrimSpec) -> Self {
        self.trim = Some(trim);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(TrimSpec::KeepFraction(f)) = self.trim {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("trim fraction {f} is outside (0, 1]")));
            }
        }
        if let Some(TrimSpec::KeepCount(0)) = self.trim {
            return Err(Error::invalid("trim keep_count must be at least 1"));
        }
        self.solver.validate()
    }
}

/// Standard synthetic control: simplex weights fitted on `predictors`.
pub fn estimate_standard(panel: &Panel, predictors: &PredictorSet, solver: &SolverConfig) -> Result<EstimationResult> {
    if predictors.n_donors() != panel.n_donors() {
        return Err(Error::invalid(format!(
            "predictor set has {} donors, panel has {}",
            predictors.n_donors(),
            panel.n_donors()
        )));
    }
    let w = solve_simplex_ls(predictors, solver)?;
    Ok(EstimationResult::from_weights(panel, w))
}

fn require_outcome_only(spec: &PredictorSpec, what: &str) -> Result<()> {
    match &spec.covariates {
        Some(c) if c.is_empty() => Ok(()),
        None => Ok(()),
        Some(_) => Err(Error::invalid(format!("the {what} estimator uses pre-treatment outcomes only"))),
    }
}

fn reject_covariates(spec: &PredictorSpec, covariates: Option<&Covariates>, what: &str) -> Result<()> {
    let uses = match (&spec.covariates, covariates) {
        (Some(cols), _) => !cols.is_empty(),
        (None, Some(c)) => c.n_columns() > 0,
        (None, None) => false,
    };
    if uses {
        return Err(Error::invalid(format!("the {what} estimator uses pre-treatment outcomes only")));
    }
    Ok(())
}

/// Synthetic control with an additive intercept.
///
/// Equivalent to fitting simplex weights on series demeaned by their own
/// pre-treatment means; the intercept then absorbs the level difference
/// `mean(treated) - sum_j w_j mean(donor_j)`.
pub fn estimate_constant_shift(panel: &Panel, spec: &PredictorSpec, solver: &SolverConfig) -> Result<EstimationResult> {
    require_outcome_only(spec, "constant-shift")?;
    let demeaned = panel.demeaned();
    let predictors = build_predictors(&demeaned, None, spec)?;
    let mut w = solve_simplex_ls(&predictors, solver)?;
    let donor_means: f64 = w
        .w
        .iter()
        .enumerate()
        .map(|(j, wj)| wj * panel.pre_mean(j + 1))
        .sum();
    w.intercept = Some(panel.pre_mean(0) - donor_means);
    Ok(EstimationResult::from_weights(panel, w))
}

/// Least squares of the treated pre-period outcomes on an intercept and the
/// donors' pre-period outcomes, without sign or adding-up constraints.
///
/// The intercept is left unpenalized: series are centred on their
/// pre-period means and the slopes take the minimum-norm least-squares
/// solution, which interpolates exactly whenever `J + 1 > T0`.
pub fn estimate_unrestricted(panel: &Panel) -> Result<EstimationResult> {
    let t0 = panel.t0();
    let j = panel.n_donors();
    let donor_means: Vec<f64> = (1..=j).map(|u| panel.pre_mean(u)).collect();
    let treated_mean = panel.pre_mean(0);
    let centred = DMatrix::from_fn(t0, j, |t, c| panel.outcome(c + 1, t) - donor_means[c]);
    let y = DVector::from_iterator(t0, panel.treated()[..t0].iter().map(|v| v - treated_mean));
    let tol = t0.max(j) as f64 * f64::EPSILON;
    let slopes = min_norm_lstsq(centred, &y, tol);
    if slopes.iter().any(|c| !c.is_finite()) {
        return Err(Error::NumericInput("least-squares solution is not finite".into()));
    }
    let intercept = treated_mean - slopes.iter().zip(&donor_means).map(|(b, m)| b * m).sum::<f64>();
    let w = WeightVector {
        w: slopes.iter().copied().collect(),
        intercept: Some(intercept),
        constrained: false,
    };
    Ok(EstimationResult::from_weights(panel, w))
}

/// Donor positions kept by trimming, in original order.
///
/// Donors are ranked by Euclidean distance between their predictor column and
/// the treated unit's; ties go to the lower position.
pub fn trim_positions(predictors: &PredictorSet, trim: &TrimSpec) -> Result<Vec<usize>> {
    let n = predictors.n_donors();
    let keep = trim.keep_count(n)?;
    let dist: Vec<f64> = predictors
        .x0
        .column_iter()
        .map(|c| (c - &predictors.x1).norm())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
    let mut kept = order[..keep].to_vec();
    kept.sort_unstable();
    Ok(kept)
}

/// Restricts panel and predictors to the `keep` donors nearest the treated unit.
pub fn trim_donor_pool(panel: &Panel, predictors: &PredictorSet, trim: &TrimSpec) -> Result<(Panel, PredictorSet)> {
    if predictors.n_donors() != panel.n_donors() {
        return Err(Error::invalid("predictor set and panel disagree on the donor count"));
    }
    let kept = trim_positions(predictors, trim)?;
    Ok((panel.select_donors(&kept)?, predictors.select_donors(&kept)))
}

/// Runs the estimator described by `spec`, trimming first when requested.
///
/// After trimming, predictors are rebuilt on the reduced pool, so
/// inverse-variance weights reflect the donors that remain.
pub fn estimate(panel: &Panel, covariates: Option<&Covariates>, spec: &EstimatorSpec) -> Result<EstimationResult> {
    spec.validate()?;
    let (panel, covariates) = match &spec.trim {
        None => (panel.clone(), covariates.cloned()),
        Some(trim) => {
            let full = build_predictors(panel, covariates, &spec.predictors)?;
            let kept = trim_positions(&full, trim)?;
            let rows: Vec<usize> = std::iter::once(0).chain(kept.iter().map(|j| j + 1)).collect();
            (panel.select_donors(&kept)?, covariates.map(|c| c.select_rows(&rows)))
        }
    };
    match spec.kind {
        EstimatorKind::Standard => {
            let predictors = build_predictors(&panel, covariates.as_ref(), &spec.predictors)?;
            estimate_standard(&panel, &predictors, &spec.solver)
        }
        EstimatorKind::ConstantShift => {
            reject_covariates(&spec.predictors, covariates.as_ref(), "constant-shift")?;
            estimate_constant_shift(&panel, &spec.predictors, &spec.solver)
        }
        EstimatorKind::Unrestricted => {
            reject_covariates(&spec.predictors, covariates.as_ref(), "unrestricted")?;
            estimate_unrestricted(&panel)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::PredictorWeighting;

    fn unit_spec() -> PredictorSpec {
        PredictorSpec::outcomes_only(PredictorWeighting::Unit)
    }

    fn fixture() -> Panel {
        Panel::new(
            vec![
                vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0],
                vec![0.5, 2.0, 1.0, 4.0, 3.5, 5.0],
                vec![1.5, 4.0, 3.0, 6.0, 4.5, 7.0],
                vec![9.0, -1.0, 4.0, 2.0, 0.0, 1.0],
                vec![-3.0, 2.0, 7.0, 1.0, 2.0, 8.0],
            ],
            4,
        )
        .unwrap()
    }

    #[test]
    fn twin_donor_reproduces_treated() {
        let treated = vec![1.0, 4.0, 2.0, 8.0, 5.0];
        let p = Panel::new(
            vec![treated.clone(), vec![0.0, 1.0, 0.0, 1.0, 0.0], treated, vec![3.0, 3.0, 3.0, 3.0, 3.0]],
            3,
        )
        .unwrap();
        let pred = build_predictors(&p, None, &unit_spec()).unwrap();
        let r = estimate_standard(&p, &pred, &SolverConfig::default()).unwrap();
        assert_eq!(r.weights.w, vec![0.0, 1.0, 0.0]);
        assert!(r.effect.iter().all(|&e| e == 0.0));
        assert_eq!((r.pre_rmse, r.post_rmse), (0.0, 0.0));
    }

    #[test]
    fn affine_average_of_two_donors() {
        let a = [1.0, 5.0, 2.0, 7.0, 3.0, 0.0];
        let b = [3.0, 1.0, 6.0, 2.0, 4.0, 1.0];
        let treated: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * x + 0.5 * y).collect();
        let p = Panel::new(
            vec![treated, a.to_vec(), b.to_vec(), vec![10.0, -4.0, 2.0, 9.0, 1.0, 1.0], vec![0.0; 6]],
            4,
        )
        .unwrap();
        let pred = build_predictors(&p, None, &unit_spec()).unwrap();
        let r = estimate_standard(&p, &pred, &SolverConfig::default()).unwrap();
        assert!((r.weights.w[0] - 0.5).abs() < 1e-9 && (r.weights.w[1] - 0.5).abs() < 1e-9);
        assert!(r.effect.iter().all(|e| e.abs() < 1e-9));
    }

    #[test]
    fn level_shift_is_absorbed_by_intercept() {
        let base = vec![2.0, 3.5, 1.0, 4.0, 6.0, 5.0];
        let p = Panel::new(
            vec![
                base.clone(),
                base.iter().map(|y| y + 5.0).collect(),
                vec![0.0, 1.0, 0.0, 2.0, 0.0, 1.0],
                vec![4.0, 1.0, 9.0, 0.0, 2.0, 3.0],
            ],
            4,
        )
        .unwrap();
        let r = estimate_constant_shift(&p, &unit_spec(), &SolverConfig::default()).unwrap();
        assert!((r.weights.w[0] - 1.0).abs() < 1e-12);
        assert!((r.weights.intercept.unwrap() + 5.0).abs() < 1e-12);
        assert!(r.effect.iter().all(|e| e.abs() < 1e-12));
    }

    #[test]
    fn constant_shift_matches_standard_on_demeaned() {
        let p = fixture();
        let spec = unit_spec();
        let shift = estimate_constant_shift(&p, &spec, &SolverConfig::default()).unwrap();
        let d = p.demeaned();
        let pred = build_predictors(&d, None, &spec).unwrap();
        let std_d = estimate_standard(&d, &pred, &SolverConfig::default()).unwrap();
        assert_eq!(shift.weights.w, std_d.weights.w);
        // On a demeaned panel the intercept vanishes.
        let again = estimate_constant_shift(&d, &spec, &SolverConfig::default()).unwrap();
        assert!(again.weights.intercept.unwrap().abs() < 1e-12);
        assert_eq!(again.weights.w, std_d.weights.w);
        for (a, b) in again.counterfactual.iter().zip(&std_d.counterfactual) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn unrestricted_recovers_exact_linear_model() {
        let d2 = [1.0, 4.0, 2.0, 7.0, 3.0, 5.0, 0.0];
        let d3 = [2.0, 0.0, 5.0, 1.0, 6.0, 2.0, 3.0];
        let d4 = [0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0];
        let treated: Vec<f64> = d2.iter().zip(&d3).map(|(a, b)| 2.0 * a - b + 7.0).collect();
        let p = Panel::new(vec![treated, d2.to_vec(), d3.to_vec(), d4.to_vec()], 5).unwrap();
        let r = estimate_unrestricted(&p).unwrap();
        assert!(!r.weights.constrained);
        assert!((r.weights.w[0] - 2.0).abs() < 1e-9);
        assert!((r.weights.w[1] + 1.0).abs() < 1e-9);
        assert!(r.weights.w[2].abs() < 1e-9);
        assert!((r.weights.intercept.unwrap() - 7.0).abs() < 1e-9);
    }

    #[test]
    fn underdetermined_regression_fits_perfectly() {
        let p = fixture().with_t0(2).unwrap();
        let r = estimate_unrestricted(&p).unwrap();
        assert!(r.pre_rmse < 1e-10);
    }

    #[test]
    fn trimming_keeps_nearest() {
        let p = Panel::new(
            vec![vec![0.0, 0.0, 1.0], vec![9.0, 0.0, 0.0], vec![0.1, 0.0, 0.0], vec![5.0, 0.0, 0.0]],
            1,
        )
        .unwrap();
        let pred = build_predictors(&p, None, &unit_spec()).unwrap();
        let (tp, tpred) = trim_donor_pool(&p, &pred, &TrimSpec::KeepCount(1)).unwrap();
        assert_eq!(tp.donor_ids(), vec![2]);
        assert_eq!(tpred.n_donors(), 1);
        let (same, _) = trim_donor_pool(&p, &pred, &TrimSpec::KeepCount(3)).unwrap();
        assert_eq!(same, p);
        assert!(matches!(
            trim_donor_pool(&p, &pred, &TrimSpec::KeepCount(4)),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn trim_fraction_rounds_like_the_donor_counts_used_in_practice() {
        assert_eq!(TrimSpec::KeepFraction(0.25).keep_count(199).unwrap(), 50);
        assert_eq!(TrimSpec::KeepFraction(0.10).keep_count(199).unwrap(), 20);
        assert_eq!(TrimSpec::KeepFraction(0.05).keep_count(199).unwrap(), 10);
        assert!(TrimSpec::KeepFraction(0.0).keep_count(199).is_err());
    }

    #[test]
    fn trimmed_weights_report_original_ids() {
        let p = fixture();
        let spec = EstimatorSpec::new(EstimatorKind::Standard, unit_spec()).with_trim(TrimSpec::KeepCount(2));
        let r = estimate(&p, None, &spec).unwrap();
        assert_eq!(r.donor_ids.len(), 2);
        assert!(r.weights.is_feasible());
        let full = build_predictors(&p, None, &unit_spec()).unwrap();
        let kept = trim_positions(&full, &TrimSpec::KeepCount(2)).unwrap();
        assert_eq!(r.donor_ids, kept.iter().map(|j| j + 1).collect::<Vec<_>>());
    }
}
