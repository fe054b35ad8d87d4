//! Simplex-constrained weighted least squares.
//!
//! Minimizes `sum_h v_h (x1_h - sum_j w_j x0_hj)^2` over the probability
//! simplex. Writing `p_j = sqrt(v) * (x0_j - x1)`, the residual of any simplex
//! combination is `sum_j w_j p_j`, so the problem is the minimum-norm point of
//! the convex hull of the `p_j`. We solve it with Wolfe's fully-corrective
//! active-set method: each major step adds the vertex with the most negative
//! gradient (the Frank-Wolfe vertex), each minor step re-solves the affine
//! least-squares problem on the active corral and steps back to the simplex
//! boundary when an active weight turns non-positive. Corrals stay affinely
//! independent, so iterates carry at most `k + 1` non-zero weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::min_norm_lstsq;
use crate::panel::{PredictorSet, WeightVector};

/// Affine weights at or below this value leave the corral.
const CORRAL_DROP: f64 = 1e-12;
/// Gap accepted when the method stalls on round-off; matches the optimality certificate.
const STALL_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iterations: usize,
    /// Stop once the duality gap is below `tolerance * (1 + f)`, `f` the squared objective.
    pub tolerance: f64,
    /// Weights below this are set to zero and the rest renormalized.
    pub zero_clip: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 100_000,
            tolerance: 1e-10,
            zero_clip: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        if self.zero_clip.is_nan() || self.zero_clip < 0.0 {
            return Err(Error::invalid("solver zero_clip must be non-negative"));
        }
        if self.max_iterations == 0 {
            return Err(Error::invalid("solver max_iterations must be at least 1"));
        }
        Ok(())
    }
}

/// Shifted, scaled donor points `p_j = sqrt(v) * (x0_j - x1)`.
fn shifted_points(pred: &PredictorSet) -> DMatrix<f64> {
    let scale = pred.v.map(f64::sqrt);
    let mut p = pred.x0.clone();
    for mut col in p.column_iter_mut() {
        col -= &pred.x1;
        col.component_mul_assign(&scale);
    }
    p
}

/// Affine weights (summing to one) of the minimum-norm point of the affine hull of `cols`.
fn affine_min_norm(points: &DMatrix<f64>, corral: &[usize]) -> Vec<f64> {
    let m = corral.len();
    if m == 1 {
        return vec![1.0];
    }
    let k = points.nrows();
    let last = points.column(corral[m - 1]);
    let mut d = DMatrix::<f64>::zeros(k, m - 1);
    for (c, &j) in corral[..m - 1].iter().enumerate() {
        d.set_column(c, &(points.column(j) - last));
    }
    let rhs = -last.into_owned();
    let z = min_norm_lstsq(d, &rhs, 1e-12);
    let mut alpha: Vec<f64> = z.iter().copied().collect();
    let tail = 1.0 - alpha.iter().sum::<f64>();
    alpha.push(tail);
    alpha
}

fn combine(points: &DMatrix<f64>, corral: &[usize], lam: &[f64]) -> DVector<f64> {
    let mut x = DVector::zeros(points.nrows());
    for (&j, &l) in corral.iter().zip(lam) {
        x.axpy(l, &points.column(j), 1.0);
    }
    x
}

fn to_weights(n: usize, corral: &[usize], lam: &[f64]) -> WeightVector {
    let mut w = vec![0.0; n];
    for (&j, &l) in corral.iter().zip(lam) {
        w[j] = l;
    }
    WeightVector::simplex(w)
}

fn clip_and_renormalize(w: &mut WeightVector, zero_clip: f64) {
    for x in &mut w.w {
        if *x < zero_clip {
            *x = 0.0;
        }
    }
    let s: f64 = w.w.iter().sum();
    if s > 0.0 {
        for x in &mut w.w {
            *x /= s;
        }
    }
}

/// Simplex-constrained weights minimizing the `v`-weighted predictor discrepancy.
///
/// Starts from the donor closest to `x1` (lowest index on ties), so the
/// output is a deterministic function of the inputs. When `x1` lies inside
/// the donors' convex hull the minimizer need not be unique; the returned
/// one is whatever the active-set path reaches.
pub fn solve_simplex_ls(pred: &PredictorSet, config: &SolverConfig) -> Result<WeightVector> {
    config.validate()?;
    if pred.x1.iter().chain(pred.x0.iter()).chain(pred.v.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NumericInput("predictor values must be finite".into()));
    }
    let n = pred.n_donors();
    let points = shifted_points(pred);
    let norms: Vec<f64> = points.column_iter().map(|c| c.norm_squared()).collect();
    let start = argmin(&norms);

    let mut corral = vec![start];
    let mut lam = vec![1.0];
    let mut x = points.column(start).into_owned();
    let mut iterations = 0;

    loop {
        let xx = x.norm_squared();
        let dots = points.tr_mul(&x);
        let entering = argmin(dots.as_slice());
        let gap = 2.0 * (xx - dots[entering]);
        if gap <= config.tolerance * (1.0 + xx) {
            break;
        }
        let stalled = |gap: f64| gap <= STALL_GAP * (1.0 + xx);
        if corral.contains(&entering) {
            if stalled(gap) {
                break;
            }
            return Err(convergence(n, &corral, &lam, gap, iterations));
        }
        iterations += 1;
        if iterations > config.max_iterations {
            return Err(convergence(n, &corral, &lam, gap, iterations - 1));
        }

        corral.push(entering);
        lam.push(0.0);
        loop {
            let alpha = affine_min_norm(&points, &corral);
            if alpha.iter().all(|&a| a > CORRAL_DROP) {
                lam = alpha;
                break;
            }
            // Move from lam towards alpha until the first weight hits zero.
            let mut theta = 1.0f64;
            let mut blocking = None;
            for (i, (&l, &a)) in lam.iter().zip(&alpha).enumerate() {
                if a <= CORRAL_DROP && l - a > 0.0 && l / (l - a) < theta {
                    theta = l / (l - a);
                    blocking = Some(i);
                }
            }
            for (l, a) in lam.iter_mut().zip(&alpha) {
                *l += theta * (a - *l);
            }
            let mut keep_c = Vec::with_capacity(corral.len());
            let mut keep_l = Vec::with_capacity(corral.len());
            for (i, (&j, &l)) in corral.iter().zip(&lam).enumerate() {
                if l > CORRAL_DROP && Some(i) != blocking {
                    keep_c.push(j);
                    keep_l.push(l);
                }
            }
            let s: f64 = keep_l.iter().sum();
            keep_l.iter_mut().for_each(|l| *l /= s);
            corral = keep_c;
            lam = keep_l;
        }
        let s: f64 = lam.iter().sum();
        lam.iter_mut().for_each(|l| *l /= s);
        let next = combine(&points, &corral, &lam);
        if next.norm_squared() >= xx && !corral.contains(&entering) {
            // The entering vertex was rejected without progress.
            if stalled(gap) {
                break;
            }
            return Err(convergence(n, &corral, &lam, gap, iterations));
        }
        x = next;
    }

    let mut w = to_weights(n, &corral, &lam);
    let interior = x.norm_squared() <= 1e-20 * norms.iter().fold(1.0f64, |m, &v| m.max(v));
    if interior && corral.len() > 1 {
        if let Some(dense) = min_norm_interpolating(&points) {
            w = WeightVector::simplex(dense);
        }
    }
    clip_and_renormalize(&mut w, config.zero_clip);
    Ok(w)
}

/// Minimum-norm weights on the optimal face when `x1` is interpolated exactly.
///
/// Among simplex weights with `x0 w = x1` (on rows with `v > 0`), returns the
/// one nearest the uniform vector. Solved in the `(k + 1)`-dimensional dual
/// by damped semismooth Newton started from the uniform weights.
fn min_norm_interpolating(points: &DMatrix<f64>) -> Option<Vec<f64>> {
    let k = points.nrows();
    let n = points.ncols();
    let mut b = DMatrix::<f64>::zeros(k + 1, n);
    b.rows_mut(0, k).copy_from(points);
    b.row_mut(k).fill(1.0);
    let mut c = DVector::<f64>::zeros(k + 1);
    c[k] = 1.0;
    let scale = points.iter().fold(1.0f64, |m, x| m.max(x.abs()));

    let primal = |lam: &DVector<f64>| -> DVector<f64> { b.tr_mul(lam).map(|x| x.max(0.0)) };
    let dual = |lam: &DVector<f64>, w: &DVector<f64>| c.dot(lam) - 0.5 * w.norm_squared();

    let mut lam = DVector::<f64>::zeros(k + 1);
    lam[k] = 1.0 / n as f64;
    let mut w = primal(&lam);
    let mut value = dual(&lam, &w);
    let mut stalled = false;
    for _ in 0..200 {
        let grad = &c - &b * &w;
        let g = grad.norm();
        let floor = scale * (n as f64).sqrt();
        // Below 1e-9 a stalled line search means round-off, not a bad direction.
        if g <= 1e-13 * floor || (stalled && g <= 1e-9 * floor) {
            let s = w.sum();
            return (s > 0.0).then(|| w.iter().map(|x| x / s).collect());
        }
        let mut h = DMatrix::<f64>::zeros(k + 1, k + 1);
        for (j, col) in b.column_iter().enumerate() {
            if w[j] > 0.0 {
                h.ger(1.0, &col, &col, 1.0);
            }
        }
        let ridge = 1e-12 * h.diagonal().max().max(1.0);
        for i in 0..=k {
            h[(i, i)] += ridge;
        }
        let step = h.cholesky()?.solve(&grad);
        let mut t = 1.0;
        loop {
            let trial = &lam + &step * t;
            let wt = primal(&trial);
            let vt = dual(&trial, &wt);
            if vt >= value + 1e-4 * t * grad.dot(&step) || t < 1e-12 {
                stalled = vt <= value;
                lam = trial;
                w = wt;
                value = vt;
                break;
            }
            t *= 0.5;
        }
    }
    None
}

fn convergence(n: usize, corral: &[usize], lam: &[f64], gap: f64, iterations: usize) -> Error {
    Error::Convergence {
        best: Box::new(to_weights(n, corral, lam)),
        gap,
        iterations,
    }
}

fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

fn residual(pred: &PredictorSet, w: &WeightVector) -> Result<DVector<f64>> {
    if w.len() != pred.n_donors() {
        return Err(Error::invalid(format!(
            "{} weights for {} donors",
            w.len(),
            pred.n_donors()
        )));
    }
    let w = DVector::from_column_slice(&w.w);
    Ok(&pred.x1 - &pred.x0 * w)
}

/// `v`-weighted norm of `x1 - x0 w`. The intercept, if any, is ignored.
pub fn objective_value(pred: &PredictorSet, w: &WeightVector) -> Result<f64> {
    let r = residual(pred, w)?;
    Ok(r.iter().zip(pred.v.iter()).map(|(r, v)| v * r * r).sum::<f64>().sqrt())
}

/// Frank-Wolfe duality gap `max_j grad f(w) . (w - e_j)` of the squared objective.
pub fn duality_gap(pred: &PredictorSet, w: &WeightVector) -> Result<f64> {
    let r = residual(pred, w)?;
    let vr = r.component_mul(&pred.v);
    // f(w) = sum v r^2, r = x1 - x0 w  =>  grad = -2 x0' V r
    let grad = pred.x0.tr_mul(&vr) * -2.0;
    let at_w: f64 = grad.iter().zip(&w.w).map(|(g, w)| g * w).sum();
    let min = grad.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(at_w - min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pset(x1: &[f64], x0_cols: &[&[f64]]) -> PredictorSet {
        let k = x1.len();
        let x0 = DMatrix::from_fn(k, x0_cols.len(), |h, j| x0_cols[j][h]);
        PredictorSet::new(
            DVector::from_column_slice(x1),
            x0,
            DVector::from_element(k, 1.0),
            (0..k).map(|h| format!("p{h}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn midpoint_of_two_scalars() {
        let p = pset(&[1.0], &[&[0.0], &[2.0]]);
        let w = solve_simplex_ls(&p, &SolverConfig::default()).unwrap();
        assert!((w.w[0] - 0.5).abs() < 1e-12 && (w.w[1] - 0.5).abs() < 1e-12);
        assert!(objective_value(&p, &w).unwrap() < 1e-12);
    }

    #[test]
    fn vertex_solution() {
        let p = pset(
            &[3.0, -1.0, 2.0],
            &[&[0.0, 0.0, 1.0], &[5.0, 1.0, -2.0], &[3.0, -1.0, 2.0], &[1.0, 4.0, 0.5]],
        );
        let w = solve_simplex_ls(&p, &SolverConfig::default()).unwrap();
        assert_eq!(w.w, vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(objective_value(&p, &w).unwrap(), 0.0);
    }

    #[test]
    fn objective_is_a_weighted_norm() {
        let p = pset(&[3.0, 4.0], &[&[0.0, 0.0], &[1.0, 1.0]]);
        let w = WeightVector::simplex(vec![1.0, 0.0]);
        assert_eq!(objective_value(&p, &w).unwrap(), 5.0);
        let short = WeightVector::simplex(vec![1.0]);
        assert!(matches!(objective_value(&p, &short), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn outside_hull_projects_onto_facet() {
        // Triangle (0,0), (1,0), (0,1); the projection of (1,1) is (0.5, 0.5).
        let p = pset(&[1.0, 1.0], &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let w = solve_simplex_ls(&p, &SolverConfig::default()).unwrap();
        assert!(w.w[0].abs() < 1e-12);
        assert!((w.w[1] - 0.5).abs() < 1e-9 && (w.w[2] - 0.5).abs() < 1e-9);
        assert!((objective_value(&p, &w).unwrap() - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zero_weight_rows_are_ignored() {
        let mut p = pset(&[1.0, 100.0], &[&[0.0, 0.0], &[2.0, 0.0]]);
        p.v[1] = 0.0;
        let w = solve_simplex_ls(&p, &SolverConfig::default()).unwrap();
        assert!((w.w[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_donors_do_not_stall() {
        let p = pset(&[1.0, 1.0], &[&[0.0, 0.0], &[0.0, 0.0], &[0.0, 0.0]]);
        let w = solve_simplex_ls(&p, &SolverConfig::default()).unwrap();
        assert!(w.is_feasible());
        assert_eq!(w.w[0], 1.0);
    }

    #[test]
    fn iteration_cap_reports_best_iterate() {
        let p = pset(&[1.0, 1.0], &[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0]]);
        let cfg = SolverConfig {
            max_iterations: 1,
            ..Default::default()
        };
        match solve_simplex_ls(&p, &cfg) {
            Err(Error::Convergence { best, gap, .. }) => {
                assert!(best.is_feasible());
                assert!(gap > 0.0);
            }
            other => panic!("expected convergence error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let p = pset(&[1.0], &[&[0.0]]);
        let cfg = SolverConfig {
            tolerance: 0.0,
            ..Default::default()
        };
        assert!(solve_simplex_ls(&p, &cfg).is_err());
    }
}
