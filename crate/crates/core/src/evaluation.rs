//! Fit metrics and backdated (hold-out) validation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorSpec};
use crate::panel::{Covariates, EstimationResult, Panel, WeightVector};

/// Root mean square of `xs`; zero for an empty slice.
pub fn rms(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64).sqrt()
}

fn gap_rmse(panel: &Panel, counterfactual: &[f64], range: std::ops::Range<usize>) -> f64 {
    let gaps: Vec<f64> = range
        .map(|t| panel.treated()[t] - counterfactual[t])
        .collect();
    rms(&gaps)
}

/// RMSE between treated and synthetic outcomes over `t = 1..=T0`.
pub fn pre_rmse(panel: &Panel, result: &EstimationResult) -> f64 {
    gap_rmse(panel, &result.counterfactual, 0..panel.t0())
}

/// RMSE between treated and synthetic outcomes over `t = T0+1..=T`.
pub fn post_rmse(panel: &Panel, result: &EstimationResult) -> f64 {
    gap_rmse(panel, &result.counterfactual, panel.t0()..panel.n_periods())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackdateReport {
    pub t0_backdated: usize,
    pub weights_backdated: WeightVector,
    pub donor_ids: Vec<usize>,
    /// RMSE on the fitting window `t = 1..=T0b`.
    pub fit_rmse: f64,
    /// RMSE on the hold-out window `t = T0b+1..=T0`.
    pub holdout_rmse: f64,
    /// RMSE on the whole original pre-period `t = 1..=T0`.
    pub pre_rmse: f64,
    /// RMSE on `t = T0+1..=T`.
    pub post_rmse: f64,
    pub counterfactual: Vec<f64>,
    pub effect_path: Vec<f64>,
}

/// Refits the estimator as if treatment had started after `t0_backdated`.
///
/// Only outcomes up to `t0_backdated` reach the estimator, so later data
/// cannot influence the weights.
pub fn backdate(
    panel: &Panel,
    covariates: Option<&Covariates>,
    spec: &EstimatorSpec,
    t0_backdated: usize,
) -> Result<BackdateReport> {
    if t0_backdated == 0 || t0_backdated >= panel.t0() {
        return Err(Error::invalid(format!(
            "backdated treatment date must satisfy 1 <= T0b < T0 (T0b = {t0_backdated}, T0 = {})",
            panel.t0()
        )));
    }
    let shifted = panel.with_t0(t0_backdated)?;
    let fit = estimate(&shifted, covariates, spec)?;
    let t0 = panel.t0();
    Ok(BackdateReport {
        t0_backdated,
        fit_rmse: gap_rmse(panel, &fit.counterfactual, 0..t0_backdated),
        holdout_rmse: gap_rmse(panel, &fit.counterfactual, t0_backdated..t0),
        pre_rmse: gap_rmse(panel, &fit.counterfactual, 0..t0),
        post_rmse: gap_rmse(panel, &fit.counterfactual, t0..panel.n_periods()),
        weights_backdated: fit.weights,
        donor_ids: fit.donor_ids,
        counterfactual: fit.counterfactual,
        effect_path: fit.effect,
    })
}
