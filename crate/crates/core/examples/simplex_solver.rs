//! The simplex-constrained least-squares solver on its own.

use nalgebra::{DMatrix, DVector};
use synthcontrol::panel::PredictorSet;
use synthcontrol::solver::{duality_gap, objective_value, solve_simplex_ls, SolverConfig};

fn main() -> synthcontrol::Result<()> {
    // Three donors at the corners of a triangle; the target sits outside it.
    let x0 = DMatrix::from_column_slice(2, 3, &[0.0, 0.0, 4.0, 0.0, 0.0, 4.0]);
    let v = DVector::from_element(2, 1.0);
    let labels = vec!["x".to_string(), "y".to_string()];

    for target in [[1.0, 1.0], [3.0, 3.0], [-1.0, 2.0]] {
        let p = PredictorSet::new(DVector::from_row_slice(&target), x0.clone(), v.clone(), labels.clone())?;
        let w = solve_simplex_ls(&p, &SolverConfig::default())?;
        println!(
            "target {target:?}: w = {:.3?}, distance {:.4}, gap {:.1e}",
            w.w,
            objective_value(&p, &w)?,
            duality_gap(&p, &w)?
        );
    }
    Ok(())
}
