//! Matching on observed covariates as well as pre-treatment outcomes.

use synthcontrol::dgp::{covariate_factor_draw, CovariateFactorConfig, EffectSpec};
use synthcontrol::estimators::{estimate, EstimatorSpec};

fn main() -> synthcontrol::Result<()> {
    for observed in [0, 2, 5] {
        let design = CovariateFactorConfig {
            n_observed: observed,
            n_unobserved: 5 - observed,
            n_donors: 200,
            ..Default::default()
        };
        let mut post = 0.0;
        for rep in 0..20 {
            let draw = covariate_factor_draw(&design, &EffectSpec::none(), 3, rep)?;
            let fit = estimate(&draw.panel, draw.covariates.as_ref(), &EstimatorSpec::default())?;
            post += fit.post_rmse / 20.0;
        }
        println!("{observed} of 5 covariates observed: mean post-RMSE {post:.2}");
    }
    Ok(())
}
