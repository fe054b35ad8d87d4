//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use synthcontrol::panel::{Panel, PredictorSet};

pub mod properties;

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Random predictor set. `x1` is a random convex combination of the donors
/// pushed away by `spread` times a standard normal vector.
pub fn random_instance<R: Rng>(rng: &mut R, k: usize, j: usize, spread: f64) -> PredictorSet {
    let x0 = DMatrix::from_fn(k, j, |_, _| normal(rng));
    let raw: Vec<f64> = (0..j).map(|_| rng.random_range(0.0..1.0)).collect();
    let s: f64 = raw.iter().sum();
    let w = DVector::from_iterator(j, raw.iter().map(|x| x / s));
    let x1 = &x0 * w + DVector::from_fn(k, |_, _| spread * normal(rng));
    let v = DVector::from_fn(k, |_, _| rng.random_range(0.5..2.0));
    PredictorSet::new(x1, x0, v, (0..k).map(|h| format!("x{h}")).collect()).unwrap()
}

fn weighted_norm(p: &PredictorSet, w: &[f64]) -> f64 {
    let mut f = 0.0;
    for h in 0..p.k() {
        let mut fit = 0.0;
        for (c, wc) in w.iter().enumerate() {
            fit += p.x0[(h, c)] * wc;
        }
        let r = p.x1[h] - fit;
        f += p.v[h] * r * r;
    }
    f.sqrt()
}

/// Exhaustive search over the simplex grid with spacing 1e-3 (J <= 4).
///
/// For J = 4 a 1e-2 grid locates the basin and a 1e-3 grid covers a box of
/// half-width 0.03 around it. Returns the best grid point and its objective.
pub fn grid_oracle(p: &PredictorSet) -> (Vec<f64>, f64) {
    let j = p.n_donors();
    assert!((1..=4).contains(&j), "grid oracle handles J <= 4");
    let mut best = (vec![0.0; j], f64::INFINITY);
    let mut consider = |w: Vec<f64>| {
        if w.iter().any(|&x| x < -1e-12) {
            return;
        }
        let f = weighted_norm(p, &w);
        if f < best.1 {
            best = (w, f);
        }
    };
    match j {
        1 => consider(vec![1.0]),
        2 => {
            for a in 0..=1000 {
                let a = a as f64 / 1000.0;
                consider(vec![a, 1.0 - a]);
            }
        }
        3 => {
            for a in 0..=1000 {
                for b in 0..=(1000 - a) {
                    let (x, y) = (a as f64 / 1000.0, b as f64 / 1000.0);
                    consider(vec![x, y, 1.0 - x - y]);
                }
            }
        }
        _ => {
            let mut coarse = (vec![0.0; 4], f64::INFINITY);
            for a in 0..=100 {
                for b in 0..=(100 - a) {
                    for c in 0..=(100 - a - b) {
                        let w = [a as f64 / 100.0, b as f64 / 100.0, c as f64 / 100.0];
                        let w = vec![w[0], w[1], w[2], 1.0 - w[0] - w[1] - w[2]];
                        let f = weighted_norm(p, &w);
                        if f < coarse.1 {
                            coarse = (w, f);
                        }
                    }
                }
            }
            let centre: Vec<i64> = coarse.0.iter().take(3).map(|x| (x * 1000.0).round() as i64).collect();
            for da in -30..=30 {
                for db in -30..=30 {
                    for dc in -30..=30 {
                        let (a, b, c) = (centre[0] + da, centre[1] + db, centre[2] + dc);
                        if a < 0 || b < 0 || c < 0 || a + b + c > 1000 {
                            continue;
                        }
                        let (x, y, z) = (a as f64 / 1000.0, b as f64 / 1000.0, c as f64 / 1000.0);
                        consider(vec![x, y, z, 1.0 - x - y - z]);
                    }
                }
            }
        }
    }
    best
}

/// Wide panel from row slices; unit 0 is treated.
pub fn panel(rows: &[&[f64]], t0: usize) -> Panel {
    Panel::new(rows.iter().map(|r| r.to_vec()).collect(), t0).unwrap()
}

/// Random panel with `j` donors and a treated unit built from them plus noise.
pub fn random_panel<R: Rng>(rng: &mut R, j: usize, t0: usize, t_total: usize) -> Panel {
    let mut rows: Vec<Vec<f64>> = (0..=j)
        .map(|_| (0..t_total).map(|_| normal(rng) + rng.random_range(-2.0..2.0)).collect())
        .collect();
    let offset = rng.random_range(-3.0..3.0);
    for y in rows[0].iter_mut() {
        *y += offset;
    }
    Panel::new(rows, t0).unwrap()
}
