//! Hold out the last pre-treatment periods to check the fit out of sample.

use synthcontrol::dgp::{grouped_factor_draw, EffectSpec, GroupedFactorConfig};
use synthcontrol::estimators::EstimatorSpec;
use synthcontrol::evaluation::backdate;
use synthcontrol::panel::{PredictorSpec, PredictorWeighting};

fn main() -> synthcontrol::Result<()> {
    let design = GroupedFactorConfig::paired(10, 20, 0.5, 0.5);
    let draw = grouped_factor_draw(&design, &EffectSpec::constant(1.5), 7, 0)?;
    let spec = EstimatorSpec {
        predictors: PredictorSpec::outcomes_only(PredictorWeighting::Unit),
        ..Default::default()
    };

    for t0b in [5, 10, 15] {
        let r = backdate(&draw.panel, None, &spec, t0b)?;
        println!(
            "fit on 1..={t0b:<2}  fit {:.3}  hold-out {:.3}  post {:.3}  twin weight {:.3}",
            r.fit_rmse, r.holdout_rmse, r.post_rmse, r.weights_backdated.w[0]
        );
    }
    Ok(())
}
