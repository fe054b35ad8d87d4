//! Shrinking the donor pool to the nearest units before fitting.

use synthcontrol::dgp::{DgpConfig, GroupedFactorConfig};
use synthcontrol::estimators::{EstimatorSpec, TrimSpec};
use synthcontrol::montecarlo::{run_cell, CellSpec};
use synthcontrol::panel::{PredictorSpec, PredictorWeighting};

fn main() -> synthcontrol::Result<()> {
    let design = DgpConfig::GroupedFactor(GroupedFactorConfig::paired(100, 20, 0.5, 0.5));
    let base = EstimatorSpec {
        predictors: PredictorSpec::outcomes_only(PredictorWeighting::Unit),
        ..Default::default()
    };
    println!("keep   pre    post");
    for keep in [199, 50, 20, 10] {
        let mut cell = CellSpec::new(format!("keep {keep}"), design.clone(), base.clone().with_trim(TrimSpec::KeepCount(keep)));
        cell.replications = 300;
        let s = run_cell(&cell, 0)?;
        println!("{keep:>4}  {:.3}  {:.3}", s.pre_rmse.mean, s.post_rmse.mean);
    }
    Ok(())
}
