//! Repeated simulation of one design/estimator cell and aggregation into
//! mean fit diagnostics and per-period error bands.
//!
//! Replication `r` of a cell draws from stream `(seed, r)` only; results are
//! collected in replication order and reduced sequentially, so a summary is
//! bit-identical for any number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dgp::{DgpConfig, EffectSpec, SimDraw};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimatorKind, EstimatorSpec};
use crate::evaluation::backdate;

/// Largest tolerated share of failed replications.
pub const MAX_FAILURE_RATE: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    pub label: String,
    pub dgp: DgpConfig,
    pub estimator: EstimatorSpec,
    pub effect: EffectSpec,
    pub replications: usize,
    pub seed: u64,
    /// Backdated treatment date used to fit the weights, if any.
    pub backdate: Option<usize>,
}

impl CellSpec {
    pub fn new(label: impl Into<String>, dgp: DgpConfig, estimator: EstimatorSpec) -> Self {
        CellSpec {
            label: label.into(),
            dgp,
            estimator,
            effect: EffectSpec::none(),
            replications: 10_000,
            seed: 0,
            backdate: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::invalid(format!("cell `{}`: replications must be >= 1", self.label)));
        }
        self.dgp.validate()?;
        self.estimator.validate()?;
        if let Some(b) = self.backdate {
            if b == 0 || b >= self.dgp.t0() {
                return Err(Error::invalid(format!(
                    "cell `{}`: backdate {b} must lie in 1..{}",
                    self.label,
                    self.dgp.t0()
                )));
            }
        }
        Ok(())
    }

    /// Whether the weight on unit 2 is reported for this cell.
    pub fn reports_w2(&self) -> bool {
        self.estimator.kind != EstimatorKind::Unrestricted && self.dgp.has_twin_donor()
    }
}

/// Outcome of a single replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replication {
    pub pre_rmse: f64,
    pub post_rmse: f64,
    /// Weight on the second unit (original index 1); 0 if it was trimmed away.
    pub w2: f64,
    pub counterfactual: Vec<f64>,
    /// Prediction minus the treated unit's untreated outcome, per period.
    pub error_path: Vec<f64>,
    /// Equal-weight average of all donors, per period.
    pub donor_average: Vec<f64>,
    pub observed: Vec<f64>,
}

/// Runs replication `r` of `cell`.
pub fn run_replication(cell: &CellSpec, replication: u64) -> Result<Replication> {
    let draw = cell.dgp.draw(&cell.effect, cell.seed, replication)?;
    replicate_on(cell, &draw)
}

fn replicate_on(cell: &CellSpec, draw: &SimDraw) -> Result<Replication> {
    let panel = &draw.panel;
    let cov = draw.covariates.as_ref();
    let (counterfactual, pre_rmse, post_rmse, w2) = match cell.backdate {
        None => {
            let r = estimate(panel, cov, &cell.estimator)?;
            let w2 = r.weight_of_unit(1);
            (r.counterfactual, r.pre_rmse, r.post_rmse, w2)
        }
        Some(t0b) => {
            let rep = backdate(panel, cov, &cell.estimator, t0b)?;
            let w2 = rep
                .donor_ids
                .iter()
                .position(|&id| id == 1)
                .map_or(0.0, |p| rep.weights_backdated.w[p]);
            (rep.counterfactual, rep.pre_rmse, rep.post_rmse, w2)
        }
    };
    let error_path = counterfactual.iter().zip(&draw.untreated).map(|(c, y)| c - y).collect();
    let j = panel.n_donors() as f64;
    let donor_average = (0..panel.n_periods())
        .map(|t| (1..panel.n_units()).map(|u| panel.outcome(u, t)).sum::<f64>() / j)
        .collect();
    Ok(Replication {
        pre_rmse,
        post_rmse,
        w2,
        counterfactual,
        error_path,
        donor_average,
        observed: panel.treated().to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanWithSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanWithSe {
    fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        MeanWithSe { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub label: String,
    pub n_donors: usize,
    pub t0: usize,
    pub sigma: f64,
    pub rho: Option<f64>,
    pub estimator: String,
    pub pre_rmse: MeanWithSe,
    pub post_rmse: MeanWithSe,
    /// Absent when unit 2 has no special role or the estimator is unrestricted.
    pub w2: Option<MeanWithSe>,
    /// Mean of the error path per period.
    pub error_mean: Vec<f64>,
    /// 2.5% quantile of the error path per period.
    pub band_lo: Vec<f64>,
    /// 97.5% quantile of the error path per period.
    pub band_hi: Vec<f64>,
    pub replications_completed: usize,
    pub replications_failed: usize,
}

impl SimulationSummary {
    pub fn mean_pre_rmse(&self) -> f64 {
        self.pre_rmse.mean
    }

    pub fn mean_post_rmse(&self) -> f64 {
        self.post_rmse.mean
    }

    pub fn mean_w2(&self) -> Option<f64> {
        self.w2.as_ref().map(|w| w.mean)
    }
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn with_pool<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Runs every replication of `cell` on `parallelism` workers (0 = all cores).
pub fn run_cell(cell: &CellSpec, parallelism: usize) -> Result<SimulationSummary> {
    cell.validate()?;
    let outcomes: Vec<Result<Replication>> = with_pool(parallelism, || {
        (0..cell.replications as u64)
            .into_par_iter()
            .map(|r| run_replication(cell, r))
            .collect()
    })?;
    summarize(cell, outcomes)
}

fn summarize(cell: &CellSpec, outcomes: Vec<Result<Replication>>) -> Result<SimulationSummary> {
    let attempted = outcomes.len();
    let mut reps = Vec::with_capacity(attempted);
    let mut failed = 0;
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(r) => reps.push(r),
            // Only numeric failures are tolerated; bad input fails the cell.
            Err(e @ (Error::Convergence { .. } | Error::NumericInput(_))) => {
                failed += 1;
                first_err.get_or_insert(e);
            }
            Err(e) => return Err(e),
        }
    }
    if reps.is_empty() || failed as f64 > MAX_FAILURE_RATE * attempted as f64 {
        return Err(Error::Harness {
            cell: cell.label.clone(),
            failed,
            attempted,
            cause: first_err.map_or_else(|| "no replications".to_string(), |e| e.to_string()),
        });
    }

    let pre: Vec<f64> = reps.iter().map(|r| r.pre_rmse).collect();
    let post: Vec<f64> = reps.iter().map(|r| r.post_rmse).collect();
    let w2 = cell
        .reports_w2()
        .then(|| MeanWithSe::of(&reps.iter().map(|r| r.w2).collect::<Vec<_>>()));

    let t_total = reps[0].error_path.len();
    let mut error_mean = Vec::with_capacity(t_total);
    let mut band_lo = Vec::with_capacity(t_total);
    let mut band_hi = Vec::with_capacity(t_total);
    let mut column = Vec::with_capacity(reps.len());
    for t in 0..t_total {
        column.clear();
        column.extend(reps.iter().map(|r| r.error_path[t]));
        error_mean.push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        band_lo.push(quantile_sorted(&column, 0.025));
        band_hi.push(quantile_sorted(&column, 0.975));
    }

    Ok(SimulationSummary {
        label: cell.label.clone(),
        n_donors: cell.dgp.n_donors(),
        t0: cell.dgp.t0(),
        sigma: cell.dgp.sigma(),
        rho: cell.dgp.rho(),
        estimator: cell.estimator.kind.to_string(),
        pre_rmse: MeanWithSe::of(&pre),
        post_rmse: MeanWithSe::of(&post),
        w2,
        error_mean,
        band_lo,
        band_hi,
        replications_completed: reps.len(),
        replications_failed: failed,
    })
}

/// Runs each cell in order; rows come back in suite order.
pub fn run_suite(suite: &[CellSpec], parallelism: usize) -> Result<Vec<SimulationSummary>> {
    if suite.is_empty() {
        return Err(Error::invalid("simulation suite is empty"));
    }
    suite.iter().map(|c| run_cell(c, parallelism)).collect()
}
