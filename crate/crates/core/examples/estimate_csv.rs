//! Fit a synthetic control to a panel stored as CSV and print the donor
//! weights and the estimated effect path.
//!
//! cargo run --example estimate_csv

use std::path::Path;

use synthcontrol::estimators::{estimate, EstimatorSpec};
use synthcontrol::io::{read_covariates_csv, read_panel_csv};

fn main() -> synthcontrol::Result<()> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/data");
    let panel = read_panel_csv(&data.join("panel.csv"), 12, Some("alder"))?;
    let covariates = read_covariates_csv(&data.join("covariates.csv"), &panel)?;

    let fit = estimate(&panel, Some(&covariates), &EstimatorSpec::default())?;
    println!("pre-RMSE {:.3}, post-RMSE {:.3}", fit.pre_rmse, fit.post_rmse);
    for (&id, &w) in fit.donor_ids.iter().zip(&fit.weights.w) {
        if w > 0.0 {
            println!("  {:<8} {w:.3}", panel.unit_labels()[id]);
        }
    }
    let years = panel.period_labels().unwrap();
    for (year, effect) in years.iter().zip(&fit.effect).skip(panel.t0()) {
        println!("{year} effect {effect:+.3}");
    }
    Ok(())
}
