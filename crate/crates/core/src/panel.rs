//! Panel data, predictor sets and the weight/result types shared by every
//! estimator.
//!
//! Unit 0 of a [`Panel`] is always the treated unit; units `1..=J` form the
//! donor pool. Periods are stored 0-based internally, and everything that is
//! written out for people to read uses 1-based unit and period numbers.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical slack allowed on the simplex constraints of a [`WeightVector`].
pub const SIMPLEX_EPS: f64 = 1e-8;

/// Balanced outcome panel with a single treated unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    outcomes: Vec<f64>,
    n_units: usize,
    n_periods: usize,
    t0: usize,
    unit_index: Vec<usize>,
    unit_labels: Vec<String>,
    period_labels: Option<Vec<i64>>,
}

impl Panel {
    /// Builds a panel from one outcome row per unit, the treated unit first.
    pub fn new(rows: Vec<Vec<f64>>, t0: usize) -> Result<Self> {
        let n_units = rows.len();
        if n_units < 2 {
            return Err(Error::invalid(format!(
                "a panel needs the treated unit and at least one donor, got {n_units} unit(s)"
            )));
        }
        let n_periods = rows[0].len();
        let mut outcomes = Vec::with_capacity(n_units * n_periods);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_periods {
                return Err(Error::invalid(format!(
                    "unit {} has {} periods, expected {n_periods}",
                    i + 1,
                    row.len()
                )));
            }
            outcomes.extend(row);
        }
        Self::from_flat(outcomes, n_units, n_periods, t0)
    }

    /// Builds a panel from a row-major `n_units x n_periods` buffer.
    pub fn from_flat(outcomes: Vec<f64>, n_units: usize, n_periods: usize, t0: usize) -> Result<Self> {
        if n_units < 2 {
            return Err(Error::invalid("a panel needs at least one donor"));
        }
        if outcomes.len() != n_units * n_periods {
            return Err(Error::invalid(format!(
                "outcome buffer has {} entries, expected {n_units} x {n_periods}",
                outcomes.len()
            )));
        }
        if t0 == 0 || t0 >= n_periods {
            return Err(Error::invalid(format!(
                "t0 must satisfy 1 <= t0 < T (t0 = {t0}, T = {n_periods})"
            )));
        }
        if let Some(pos) = outcomes.iter().position(|y| !y.is_finite()) {
            return Err(Error::NumericInput(format!(
                "outcome for unit {} at period {} is not finite",
                pos / n_periods + 1,
                pos % n_periods + 1
            )));
        }
        Ok(Panel {
            outcomes,
            n_units,
            n_periods,
            t0,
            unit_index: (0..n_units).collect(),
            unit_labels: (1..=n_units).map(|i| i.to_string()).collect(),
            period_labels: None,
        })
    }

    pub fn with_unit_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n_units {
            return Err(Error::invalid(format!(
                "{} unit labels for {} units",
                labels.len(),
                self.n_units
            )));
        }
        self.unit_labels = labels;
        Ok(self)
    }

    pub fn with_period_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n_periods {
            return Err(Error::invalid(format!(
                "{} period labels for {} periods",
                labels.len(),
                self.n_periods
            )));
        }
        self.period_labels = Some(labels);
        Ok(self)
    }

    /// Same outcomes with a different treatment date.
    pub fn with_t0(&self, t0: usize) -> Result<Self> {
        if t0 == 0 || t0 >= self.n_periods {
            return Err(Error::invalid(format!(
                "t0 must satisfy 1 <= t0 < T (t0 = {t0}, T = {})",
                self.n_periods
            )));
        }
        let mut p = self.clone();
        p.t0 = t0;
        Ok(p)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    /// Number of donors, J.
    pub fn n_donors(&self) -> usize {
        self.n_units - 1
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    pub fn unit(&self, i: usize) -> &[f64] {
        &self.outcomes[i * self.n_periods..(i + 1) * self.n_periods]
    }

    pub fn treated(&self) -> &[f64] {
        self.unit(0)
    }

    pub fn donor(&self, j: usize) -> &[f64] {
        self.unit(j + 1)
    }

    pub fn outcome(&self, unit: usize, period: usize) -> f64 {
        self.outcomes[unit * self.n_periods + period]
    }

    /// Position of each unit in the panel it was originally loaded from.
    pub fn unit_index(&self) -> &[usize] {
        &self.unit_index
    }

    pub fn unit_labels(&self) -> &[String] {
        &self.unit_labels
    }

    pub fn period_labels(&self) -> Option<&[i64]> {
        self.period_labels.as_deref()
    }

    /// Original indices of the donors, in weight order.
    pub fn donor_ids(&self) -> Vec<usize> {
        self.unit_index[1..].to_vec()
    }

    pub fn pre_mean(&self, unit: usize) -> f64 {
        let row = self.unit(unit);
        row[..self.t0].iter().sum::<f64>() / self.t0 as f64
    }

    /// Every unit's series minus its own pre-treatment mean.
    pub fn demeaned(&self) -> Panel {
        let mut p = self.clone();
        for i in 0..self.n_units {
            let m = self.pre_mean(i);
            for y in &mut p.outcomes[i * self.n_periods..(i + 1) * self.n_periods] {
                *y -= m;
            }
        }
        p
    }

    /// Keeps the treated unit plus the listed donors (0-based donor positions), in that order.
    pub fn select_donors(&self, donors: &[usize]) -> Result<Panel> {
        if donors.is_empty() {
            return Err(Error::invalid("cannot select an empty donor pool"));
        }
        let mut units = Vec::with_capacity(donors.len() + 1);
        units.push(0);
        for &j in donors {
            if j >= self.n_donors() {
                return Err(Error::invalid(format!("donor position {j} out of range")));
            }
            units.push(j + 1);
        }
        let mut outcomes = Vec::with_capacity(units.len() * self.n_periods);
        for &u in &units {
            outcomes.extend_from_slice(self.unit(u));
        }
        Ok(Panel {
            outcomes,
            n_units: units.len(),
            n_periods: self.n_periods,
            t0: self.t0,
            unit_index: units.iter().map(|&u| self.unit_index[u]).collect(),
            unit_labels: units.iter().map(|&u| self.unit_labels[u].clone()).collect(),
            period_labels: self.period_labels.clone(),
        })
    }

    /// Returns a copy with a single outcome replaced.
    pub fn with_outcome(&self, unit: usize, period: usize, value: f64) -> Result<Panel> {
        if !value.is_finite() {
            return Err(Error::NumericInput("replacement outcome is not finite".into()));
        }
        let mut p = self.clone();
        p.outcomes[unit * self.n_periods + period] = value;
        Ok(p)
    }
}

/// Observed unit-level covariates, one row per unit in panel order.
#[derive(Debug, Clone, PartialEq)]
pub struct Covariates {
    pub values: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl Covariates {
    pub fn new(values: DMatrix<f64>) -> Self {
        let labels = (1..=values.ncols()).map(|c| format!("Z_{c}")).collect();
        Covariates { values, labels }
    }

    /// Replaces the default `Z_1, Z_2, ...` column names.
    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.values.ncols(), "one label per covariate column");
        self.labels = labels;
        self
    }

    pub fn n_columns(&self) -> usize {
        self.values.ncols()
    }

    /// Restricts to the first `n` columns.
    pub fn leading(&self, n: usize) -> Covariates {
        let n = n.min(self.n_columns());
        Covariates {
            values: self.values.columns(0, n).into_owned(),
            labels: self.labels[..n].to_vec(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Covariates {
        Covariates {
            values: self.values.select_rows(rows.iter()),
            labels: self.labels.clone(),
        }
    }
}

/// How predictor importance weights `v` are set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorWeighting {
    /// `1 / sample variance across donors`, with 1 for rows without variation.
    #[default]
    InverseVariance,
    /// Every row gets weight 1.
    Unit,
}

/// Which pre-treatment periods and covariate columns enter the predictor set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorSpec {
    /// 1-based pre-treatment periods; all of `1..=T0` when absent.
    #[serde(default)]
    pub periods: Option<Vec<usize>>,
    /// 0-based covariate columns; all available columns when absent.
    #[serde(default)]
    pub covariates: Option<Vec<usize>>,
    #[serde(default)]
    pub weighting: PredictorWeighting,
}

impl PredictorSpec {
    pub fn outcomes_only(weighting: PredictorWeighting) -> Self {
        PredictorSpec {
            periods: None,
            covariates: Some(Vec::new()),
            weighting,
        }
    }
}

/// Matching variables: `x1` for the treated unit, one column of `x0` per donor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorSet {
    pub x1: DVector<f64>,
    pub x0: DMatrix<f64>,
    pub v: DVector<f64>,
    pub labels: Vec<String>,
}

impl PredictorSet {
    /// Checks shapes, finiteness and the `v` constraints.
    pub fn new(x1: DVector<f64>, x0: DMatrix<f64>, v: DVector<f64>, labels: Vec<String>) -> Result<Self> {
        let k = x1.len();
        if k == 0 {
            return Err(Error::invalid("predictor set is empty"));
        }
        if x0.nrows() != k || v.len() != k || labels.len() != k {
            return Err(Error::invalid(format!(
                "predictor shapes disagree: x1 {k}, x0 {}x{}, v {}, labels {}",
                x0.nrows(),
                x0.ncols(),
                v.len(),
                labels.len()
            )));
        }
        if x0.ncols() == 0 {
            return Err(Error::invalid("predictor set has no donors"));
        }
        if x1.iter().chain(x0.iter()).chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::NumericInput("predictor values must be finite".into()));
        }
        if v.iter().any(|&x| x < 0.0) || !v.iter().any(|&x| x > 0.0) {
            return Err(Error::invalid(
                "predictor weights must be non-negative with at least one positive",
            ));
        }
        Ok(PredictorSet { x1, x0, v, labels })
    }

    pub fn k(&self) -> usize {
        self.x1.len()
    }

    pub fn n_donors(&self) -> usize {
        self.x0.ncols()
    }

    /// Keeps only the listed donor columns.
    pub fn select_donors(&self, donors: &[usize]) -> PredictorSet {
        PredictorSet {
            x1: self.x1.clone(),
            x0: self.x0.select_columns(donors.iter()),
            v: self.v.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Stacks selected pre-treatment outcomes and covariates into a [`PredictorSet`].
pub fn build_predictors(panel: &Panel, covariates: Option<&Covariates>, spec: &PredictorSpec) -> Result<PredictorSet> {
    let t0 = panel.t0();
    let periods: Vec<usize> = match &spec.periods {
        Some(p) => p.clone(),
        None => (1..=t0).collect(),
    };
    if let Some(&bad) = periods.iter().find(|&&t| t == 0 || t > t0) {
        return Err(Error::invalid(format!(
            "predictor period {bad} is outside the pre-treatment window 1..={t0}"
        )));
    }
    let cov_cols: Vec<usize> = match (&spec.covariates, covariates) {
        (Some(cols), _) => cols.clone(),
        (None, Some(c)) => (0..c.n_columns()).collect(),
        (None, None) => Vec::new(),
    };
    if !cov_cols.is_empty() {
        let c = covariates.ok_or_else(|| Error::invalid("covariate columns requested but no covariates supplied"))?;
        if c.values.nrows() != panel.n_units() {
            return Err(Error::invalid(format!(
                "covariate matrix has {} rows for {} units",
                c.values.nrows(),
                panel.n_units()
            )));
        }
        if let Some(&bad) = cov_cols.iter().find(|&&col| col >= c.n_columns()) {
            return Err(Error::invalid(format!(
                "covariate column {} requested but only {} available",
                bad + 1,
                c.n_columns()
            )));
        }
    }

    let k = periods.len() + cov_cols.len();
    let n = panel.n_units();
    // Row-major k x (J+1); column 0 is the treated unit.
    let mut rows = DMatrix::<f64>::zeros(k, n);
    let mut labels = Vec::with_capacity(k);
    for (h, &t) in periods.iter().enumerate() {
        for u in 0..n {
            rows[(h, u)] = panel.outcome(u, t - 1);
        }
        labels.push(format!("Y_pre_t{t}"));
    }
    if let Some(c) = covariates {
        for (off, &col) in cov_cols.iter().enumerate() {
            let h = periods.len() + off;
            for u in 0..n {
                rows[(h, u)] = c.values[(u, col)];
            }
            labels.push(c.labels[col].clone());
        }
    }

    let x1 = rows.column(0).into_owned();
    let x0 = rows.columns(1, n - 1).into_owned();
    let v = match spec.weighting {
        PredictorWeighting::Unit => DVector::from_element(k, 1.0),
        PredictorWeighting::InverseVariance => DVector::from_iterator(
            k,
            (0..k).map(|h| {
                let var = sample_variance(x0.row(h).iter().copied());
                if var > 0.0 {
                    1.0 / var
                } else {
                    1.0
                }
            }),
        ),
    };
    PredictorSet::new(x1, x0, v, labels)
}

fn sample_variance(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.clone().sum::<f64>() / n as f64;
    xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64
}

/// Donor weights, optionally with an additive intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub w: Vec<f64>,
    pub intercept: Option<f64>,
    pub constrained: bool,
}

impl WeightVector {
    pub fn simplex(w: Vec<f64>) -> Self {
        WeightVector {
            w,
            intercept: None,
            constrained: true,
        }
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    /// `true` when non-negative and summing to one within [`SIMPLEX_EPS`].
    pub fn is_feasible(&self) -> bool {
        let sum: f64 = self.w.iter().sum();
        self.w.iter().all(|&x| x >= -SIMPLEX_EPS) && (sum - 1.0).abs() <= SIMPLEX_EPS
    }

    pub fn nonzero_count(&self, threshold: f64) -> usize {
        self.w.iter().filter(|&&x| x.abs() > threshold).count()
    }

    /// `intercept + sum_j w_j * donor_j(t)` for every period.
    pub fn synthesize(&self, panel: &Panel) -> Vec<f64> {
        let a = self.intercept.unwrap_or(0.0);
        (0..panel.n_periods())
            .map(|t| {
                a + self
                    .w
                    .iter()
                    .enumerate()
                    .map(|(j, &wj)| wj * panel.outcome(j + 1, t))
                    .sum::<f64>()
            })
            .collect()
    }
}

/// Fitted counterfactual and effect paths with fit diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub weights: WeightVector,
    pub counterfactual: Vec<f64>,
    pub effect: Vec<f64>,
    pub pre_rmse: f64,
    pub post_rmse: f64,
    /// Original (0-based) unit index of the donor behind each weight.
    pub donor_ids: Vec<usize>,
}

impl EstimationResult {
    /// Assembles a result from fitted weights; effect and RMSEs are derived from `panel`.
    pub fn from_weights(panel: &Panel, weights: WeightVector) -> Self {
        let counterfactual = weights.synthesize(panel);
        let effect: Vec<f64> = panel
            .treated()
            .iter()
            .zip(&counterfactual)
            .map(|(y, yhat)| y - yhat)
            .collect();
        let t0 = panel.t0();
        let pre_rmse = crate::evaluation::rms(&effect[..t0]);
        let post_rmse = crate::evaluation::rms(&effect[t0..]);
        EstimationResult {
            weights,
            counterfactual,
            effect,
            pre_rmse,
            post_rmse,
            donor_ids: panel.donor_ids(),
        }
    }

    /// Weight placed on the donor with the given original unit index (0 if absent).
    pub fn weight_of_unit(&self, unit: usize) -> f64 {
        self.donor_ids
            .iter()
            .position(|&id| id == unit)
            .map_or(0.0, |p| self.weights.w[p])
    }
}
