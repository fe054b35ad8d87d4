//! Dense least-squares helpers.

use nalgebra::{DMatrix, DVector};

/// Minimum-norm least-squares solution of `a x = y`.
///
/// Uses a complete orthogonal decomposition: column-pivoted QR of `a`, rank
/// cut where `|R_ii| <= rtol * |R_00|`, then a QR of the leading rows'
/// transpose for the minimum-norm solve.
pub(crate) fn min_norm_lstsq(a: DMatrix<f64>, y: &DVector<f64>, rtol: f64) -> DVector<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DVector::zeros(n);
    }
    let qr = a.col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..r.nrows().min(n))
        .take_while(|&i| lead > 0.0 && r[(i, i)].abs() > rtol * lead)
        .count();
    let mut z = DVector::zeros(n);
    if rank > 0 {
        let q = qr.q();
        let c = q.columns(0, rank).tr_mul(y);
        let r1t = r.rows(0, rank).transpose();
        let qr2 = r1t.qr();
        // r1 = r2' q2', so z = q2 r2'^{-1} c.
        let r2t = qr2.r().transpose();
        let u = r2t
            .solve_lower_triangular(&c)
            .unwrap_or_else(|| DVector::zeros(rank));
        z = qr2.q() * u;
    }
    qr.p().inv_permute_rows(&mut z);
    z
}
