//! One draw from the grouped auto-regressive design.

use synthcontrol::dgp::{ar_draw, ArConfig, EffectSpec};
use synthcontrol::estimators::{estimate, EstimatorSpec};
use synthcontrol::panel::{PredictorSpec, PredictorWeighting};

fn main() -> synthcontrol::Result<()> {
    let design = ArConfig::default();
    let draw = ar_draw(&design, &EffectSpec::none(), 11, 0)?;
    let spec = EstimatorSpec {
        predictors: PredictorSpec::outcomes_only(PredictorWeighting::Unit),
        ..Default::default()
    };
    let fit = estimate(&draw.panel, None, &spec)?;

    let own_group: f64 = fit.weights.w[..9].iter().sum();
    println!("weight on the treated unit's group: {own_group:.3}");
    println!("pre-RMSE {:.3}, post-RMSE {:.3}", fit.pre_rmse, fit.post_rmse);
    println!(" t  observed  synthetic");
    for t in (0..design.t_total).step_by(3) {
        println!("{:>2}  {:>8.2}  {:>9.2}", t + 1, draw.panel.treated()[t], fit.counterfactual[t]);
    }
    Ok(())
}
