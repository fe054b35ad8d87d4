//! Standard, constant-shift and unrestricted fits on one simulated panel.

use synthcontrol::dgp::{grouped_factor_draw, EffectSpec, GroupedFactorConfig};
use synthcontrol::estimators::{estimate, EstimatorKind, EstimatorSpec};
use synthcontrol::panel::{PredictorSpec, PredictorWeighting};

fn main() -> synthcontrol::Result<()> {
    let design = GroupedFactorConfig::paired(10, 15, 0.5, 0.25);
    let draw = grouped_factor_draw(&design, &EffectSpec::none(), 2024, 0)?;
    let predictors = PredictorSpec::outcomes_only(PredictorWeighting::Unit);

    for kind in [EstimatorKind::Standard, EstimatorKind::ConstantShift, EstimatorKind::Unrestricted] {
        let fit = estimate(&draw.panel, None, &EstimatorSpec::new(kind, predictors.clone()))?;
        let negative = fit.weights.w.iter().filter(|&&w| w < 0.0).count();
        println!(
            "{:<15} pre {:.3}  post {:.3}  intercept {:>7}  negative weights {negative}",
            kind.to_string(),
            fit.pre_rmse,
            fit.post_rmse,
            fit.weights.intercept.map_or("-".into(), |a| format!("{a:.3}")),
        );
    }
    Ok(())
}
