//! Simulated panels: the grouped factor model, the covariate factor model and
//! the grouped auto-regressive model, each with unit 1 treated.
//!
//! Generators draw standard variates and scale them afterwards, in a fixed
//! order documented on each function. Two configurations that differ only in
//! a scale parameter (noise level, effect size) therefore share their random
//! numbers for the same `(seed, replication)`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::{Covariates, Panel};
use crate::rng::{replication_rng, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    #[default]
    None,
    /// Each group factor gains a linear drift `b_f * t`, `b_f ~ N(0, drift_sd^2)`.
    StochasticTrend,
}

fn finite_non_negative(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

fn default_t_total() -> usize {
    30
}

fn default_drift_sd() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupedFactorConfig {
    pub n_groups: usize,
    #[serde(default = "default_units_per_group")]
    pub units_per_group: usize,
    #[serde(default = "default_t_total")]
    pub t_total: usize,
    pub t0: usize,
    pub rho: f64,
    pub sigma: f64,
    #[serde(default)]
    pub trend: Trend,
    #[serde(default = "default_drift_sd")]
    pub drift_sd: f64,
    /// Slope of the common time trend, `delta_t = delta * t`.
    #[serde(default)]
    pub delta: f64,
}

fn default_units_per_group() -> usize {
    2
}

impl GroupedFactorConfig {
    /// Paired design: `n_groups` factors, two units each.
    pub fn paired(n_groups: usize, t0: usize, rho: f64, sigma: f64) -> Self {
        GroupedFactorConfig {
            n_groups,
            units_per_group: 2,
            t_total: 30,
            t0,
            rho,
            sigma,
            trend: Trend::None,
            drift_sd: default_drift_sd(),
            delta: 0.0,
        }
    }

    pub fn n_units(&self) -> usize {
        self.n_groups * self.units_per_group
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 {
            return Err(Error::invalid("grouped factor model needs at least one group"));
        }
        if self.units_per_group < 2 {
            return Err(Error::invalid("each group needs at least two units"));
        }
        if self.t0 == 0 || self.t0 >= self.t_total {
            return Err(Error::invalid(format!(
                "need 1 <= t0 < t_total (t0 = {}, t_total = {})",
                self.t0, self.t_total
            )));
        }
        if !finite_non_negative(self.sigma) {
            return Err(Error::invalid("sigma must be finite and non-negative"));
        }
        if self.rho.is_nan() || self.rho.abs() > 1.0 {
            return Err(Error::invalid("|rho| must not exceed 1"));
        }
        if !finite_non_negative(self.drift_sd) || !self.delta.is_finite() {
            return Err(Error::invalid("drift_sd must be non-negative and delta finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateFactorConfig {
    /// Covariates the analyst observes (placed in Z).
    pub n_observed: usize,
    /// Covariates left unobserved (placed in mu).
    pub n_unobserved: usize,
    pub n_donors: usize,
    #[serde(default = "default_t_total")]
    pub t_total: usize,
    pub t0: usize,
    pub delta: f64,
    pub covariate_low: f64,
    pub covariate_high: f64,
    pub sigma: f64,
}

impl Default for CovariateFactorConfig {
    fn default() -> Self {
        CovariateFactorConfig {
            n_observed: 0,
            n_unobserved: 5,
            n_donors: 1000,
            t_total: 30,
            t0: 4,
            delta: 100.0,
            covariate_low: 0.0,
            covariate_high: 20.0,
            sigma: 5.0,
        }
    }
}

impl CovariateFactorConfig {
    pub fn n_covariates(&self) -> usize {
        self.n_observed + self.n_unobserved
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_donors == 0 {
            return Err(Error::invalid("covariate factor model needs at least one donor"));
        }
        if self.t0 == 0 || self.t0 >= self.t_total {
            return Err(Error::invalid("need 1 <= t0 < t_total"));
        }
        if self.covariate_high.partial_cmp(&self.covariate_low) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::invalid("covariate_high must exceed covariate_low"));
        }
        if !finite_non_negative(self.sigma) || !self.delta.is_finite() {
            return Err(Error::invalid("sigma must be finite and non-negative, delta finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArConfig {
    pub n_units: usize,
    pub n_groups: usize,
    pub t_total: usize,
    pub t0: usize,
    pub y_init_mean: f64,
    pub y_init_sd: f64,
    pub alpha_mean: f64,
    pub alpha_sd: f64,
    pub eps_sd: f64,
}

impl Default for ArConfig {
    fn default() -> Self {
        ArConfig {
            n_units: 50,
            n_groups: 5,
            t_total: 30,
            t0: 20,
            y_init_mean: 100.0,
            y_init_sd: 20.0,
            alpha_mean: 1.0,
            alpha_sd: 0.1,
            eps_sd: 1.0,
        }
    }
}

impl ArConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 || !self.n_units.is_multiple_of(self.n_groups) {
            return Err(Error::invalid(format!(
                "{} units cannot be split into {} equal groups",
                self.n_units, self.n_groups
            )));
        }
        if self.n_units < 2 {
            return Err(Error::invalid("AR model needs at least two units"));
        }
        if self.t0 == 0 || self.t0 >= self.t_total {
            return Err(Error::invalid("need 1 <= t0 < t_total"));
        }
        if [self.y_init_sd, self.alpha_sd, self.eps_sd].iter().any(|s| !finite_non_negative(*s)) {
            return Err(Error::invalid("standard deviations must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectShape {
    #[default]
    None,
    Constant,
    /// Grows linearly, reaching `magnitude` in the last period.
    LinearRamp,
}

/// Treatment effect added to unit 1 after `T0`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectSpec {
    #[serde(default)]
    pub shape: EffectShape,
    #[serde(default)]
    pub magnitude: f64,
}

impl EffectSpec {
    pub fn none() -> Self {
        EffectSpec::default()
    }

    pub fn constant(magnitude: f64) -> Self {
        EffectSpec {
            shape: EffectShape::Constant,
            magnitude,
        }
    }

    /// Effect at 0-based period `t`.
    pub fn value(&self, t: usize, t0: usize, t_total: usize) -> f64 {
        if t < t0 {
            return 0.0;
        }
        match self.shape {
            EffectShape::None => 0.0,
            EffectShape::Constant => self.magnitude,
            EffectShape::LinearRamp => self.magnitude * (t + 1 - t0) as f64 / (t_total - t0) as f64,
        }
    }

    pub fn path(&self, t0: usize, t_total: usize) -> Vec<f64> {
        (0..t_total).map(|t| self.value(t, t0, t_total)).collect()
    }
}

/// One simulated data set.
#[derive(Debug, Clone, PartialEq)]
pub struct SimDraw {
    pub panel: Panel,
    pub covariates: Option<Covariates>,
    /// The treated unit's outcome without treatment.
    pub untreated: Vec<f64>,
}

fn normal(rng: &mut SimRng) -> f64 {
    StandardNormal.sample(rng)
}

fn add_effect(rows: &mut [Vec<f64>], effect: &EffectSpec, t0: usize) -> Vec<f64> {
    let t_total = rows[0].len();
    let untreated = rows[0].clone();
    for (t, y) in rows[0].iter_mut().enumerate() {
        *y += effect.value(t, t0, t_total);
    }
    untreated
}

/// Grouped factor model `Y_it = delta_t + lambda_{f(i)t} + eps_it`.
///
/// Unit `i` (0-based) loads on factor `i / units_per_group`, so the treated
/// unit shares its factor with unit 2 only in the paired design. Draw order:
/// factor paths group by group (`lambda_f1` and every innovation standard
/// normal), then `eps` unit by unit, then one drift per group if trending.
pub fn gen_grouped_factor(config: &GroupedFactorConfig, effect: &EffectSpec, seed: u64) -> Result<Panel> {
    Ok(grouped_factor_draw(config, effect, seed, 0)?.panel)
}

pub fn grouped_factor_draw(
    config: &GroupedFactorConfig,
    effect: &EffectSpec,
    seed: u64,
    replication: u64,
) -> Result<SimDraw> {
    config.validate()?;
    let mut rng = replication_rng(seed, replication);
    let t_total = config.t_total;
    let mut factors = vec![vec![0.0; t_total]; config.n_groups];
    for path in &mut factors {
        path[0] = normal(&mut rng);
        for t in 1..t_total {
            path[t] = config.rho * path[t - 1] + normal(&mut rng);
        }
    }
    let mut rows = Vec::with_capacity(config.n_units());
    for i in 0..config.n_units() {
        let f = &factors[i / config.units_per_group];
        rows.push(
            (0..t_total)
                .map(|t| config.delta * (t + 1) as f64 + f[t] + config.sigma * normal(&mut rng))
                .collect::<Vec<f64>>(),
        );
    }
    // Drawn last so the remaining draws match the design without drift.
    if config.trend == Trend::StochasticTrend {
        for group in rows.chunks_mut(config.units_per_group) {
            let slope = config.drift_sd * normal(&mut rng);
            for row in group {
                for (t, y) in row.iter_mut().enumerate() {
                    *y += slope * (t + 1) as f64;
                }
            }
        }
    }
    let untreated = add_effect(&mut rows, effect, config.t0);
    Ok(SimDraw {
        panel: Panel::new(rows, config.t0)?,
        covariates: None,
        untreated,
    })
}

/// Linear factor model with `n_observed + n_unobserved` unit covariates.
///
/// `Y_jt = delta + sum_c coef_ct * u_jc + eps_jt` with `u_jc` uniform on
/// `[covariate_low, covariate_high]`, each `coef_c` a random walk started at
/// a standard normal, and `eps ~ N(0, sigma^2)`. The first `n_observed`
/// covariates are returned as observed. Draw order: all covariates unit by
/// unit, then coefficient paths covariate by covariate, then `eps` unit by unit.
pub fn gen_covariate_factor(config: &CovariateFactorConfig, seed: u64) -> Result<(Panel, Covariates)> {
    let draw = covariate_factor_draw(config, &EffectSpec::none(), seed, 0)?;
    let cov = draw.covariates.unwrap_or_else(|| Covariates::new(DMatrix::zeros(draw.panel.n_units(), 0)));
    Ok((draw.panel, cov))
}

pub fn covariate_factor_draw(
    config: &CovariateFactorConfig,
    effect: &EffectSpec,
    seed: u64,
    replication: u64,
) -> Result<SimDraw> {
    config.validate()?;
    let mut rng = replication_rng(seed, replication);
    let n = config.n_donors + 1;
    let k = config.n_covariates();
    let t_total = config.t_total;
    let unif = Uniform::new(config.covariate_low, config.covariate_high)
        .map_err(|e| Error::invalid(format!("covariate range: {e}")))?;
    let mut cov = DMatrix::zeros(n, k);
    for j in 0..n {
        for c in 0..k {
            cov[(j, c)] = rng.sample(unif);
        }
    }
    let mut coef = vec![vec![0.0; t_total]; k];
    for path in &mut coef {
        path[0] = normal(&mut rng);
        for t in 1..t_total {
            path[t] = path[t - 1] + normal(&mut rng);
        }
    }
    let mut rows = Vec::with_capacity(n);
    for j in 0..n {
        rows.push(
            (0..t_total)
                .map(|t| {
                    let signal: f64 = (0..k).map(|c| coef[c][t] * cov[(j, c)]).sum();
                    config.delta + signal + config.sigma * normal(&mut rng)
                })
                .collect::<Vec<f64>>(),
        );
    }
    let untreated = add_effect(&mut rows, effect, config.t0);
    let observed = Covariates::new(cov.columns(0, config.n_observed).into_owned());
    Ok(SimDraw {
        panel: Panel::new(rows, config.t0)?,
        covariates: Some(observed),
        untreated,
    })
}

/// Grouped AR(1) with time-varying coefficients `Y_jt = alpha_jt Y_jt-1 + eps_jt`.
///
/// Units form `n_groups` contiguous blocks sharing one coefficient path.
/// Draw order: initial values unit by unit, coefficient paths group by group
/// (periods 2..T), then `eps` unit by unit (periods 2..T).
pub fn gen_ar(config: &ArConfig, seed: u64) -> Result<Panel> {
    Ok(ar_draw(config, &EffectSpec::none(), seed, 0)?.panel)
}

pub fn ar_draw(config: &ArConfig, effect: &EffectSpec, seed: u64, replication: u64) -> Result<SimDraw> {
    config.validate()?;
    let mut rng = replication_rng(seed, replication);
    let n = config.n_units;
    let t_total = config.t_total;
    let group_size = n / config.n_groups;
    let init: Vec<f64> = (0..n)
        .map(|_| config.y_init_mean + config.y_init_sd * normal(&mut rng))
        .collect();
    let alpha: Vec<Vec<f64>> = (0..config.n_groups)
        .map(|_| {
            (1..t_total)
                .map(|_| config.alpha_mean + config.alpha_sd * normal(&mut rng))
                .collect()
        })
        .collect();
    let mut rows = Vec::with_capacity(n);
    for (j, &y1) in init.iter().enumerate() {
        let a = &alpha[j / group_size];
        let mut row = Vec::with_capacity(t_total);
        row.push(y1);
        for t in 1..t_total {
            let prev = row[t - 1];
            row.push(a[t - 1] * prev + config.eps_sd * normal(&mut rng));
        }
        rows.push(row);
    }
    let untreated = add_effect(&mut rows, effect, config.t0);
    Ok(SimDraw {
        panel: Panel::new(rows, config.t0)?,
        covariates: None,
        untreated,
    })
}

/// Any of the simulation designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpConfig {
    GroupedFactor(GroupedFactorConfig),
    CovariateFactor(CovariateFactorConfig),
    Ar(ArConfig),
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            DgpConfig::GroupedFactor(c) => c.validate(),
            DgpConfig::CovariateFactor(c) => c.validate(),
            DgpConfig::Ar(c) => c.validate(),
        }
    }

    pub fn draw(&self, effect: &EffectSpec, seed: u64, replication: u64) -> Result<SimDraw> {
        match self {
            DgpConfig::GroupedFactor(c) => grouped_factor_draw(c, effect, seed, replication),
            DgpConfig::CovariateFactor(c) => covariate_factor_draw(c, effect, seed, replication),
            DgpConfig::Ar(c) => ar_draw(c, effect, seed, replication),
        }
    }

    pub fn n_donors(&self) -> usize {
        match self {
            DgpConfig::GroupedFactor(c) => c.n_units() - 1,
            DgpConfig::CovariateFactor(c) => c.n_donors,
            DgpConfig::Ar(c) => c.n_units - 1,
        }
    }

    pub fn t0(&self) -> usize {
        match self {
            DgpConfig::GroupedFactor(c) => c.t0,
            DgpConfig::CovariateFactor(c) => c.t0,
            DgpConfig::Ar(c) => c.t0,
        }
    }

    pub fn t_total(&self) -> usize {
        match self {
            DgpConfig::GroupedFactor(c) => c.t_total,
            DgpConfig::CovariateFactor(c) => c.t_total,
            DgpConfig::Ar(c) => c.t_total,
        }
    }

    /// Transitory noise scale.
    pub fn sigma(&self) -> f64 {
        match self {
            DgpConfig::GroupedFactor(c) => c.sigma,
            DgpConfig::CovariateFactor(c) => c.sigma,
            DgpConfig::Ar(c) => c.eps_sd,
        }
    }

    /// Factor persistence; absent for the AR design.
    pub fn rho(&self) -> Option<f64> {
        match self {
            DgpConfig::GroupedFactor(c) => Some(c.rho),
            DgpConfig::CovariateFactor(_) => Some(1.0),
            DgpConfig::Ar(_) => None,
        }
    }

    /// Whether unit 2 is the unique correct donor, which makes its weight meaningful.
    pub fn has_twin_donor(&self) -> bool {
        matches!(self, DgpConfig::GroupedFactor(c) if c.units_per_group == 2)
    }
}
