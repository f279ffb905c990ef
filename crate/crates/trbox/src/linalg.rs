//! Small dense solves shared by the Newton-type methods.

use nalgebra::{DMatrix, DVector};

/// Solve `A x = b` by LU with partial pivoting, rejecting systems whose
/// pivots fall below `1e-14 * |A|_inf` or whose solve residual exceeds
/// `1e-8 * |b|`.
pub(crate) fn lu_solve_checked(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, a.ncols());
    debug_assert_eq!(n, b.len());

    let norm_inf = (0..n)
        .map(|i| a.row(i).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if !norm_inf.is_finite() || norm_inf == 0.0 {
        return None;
    }

    let lu = a.clone().lu();
    let u = lu.u();
    let min_pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    if !min_pivot.is_finite() || min_pivot < 1e-14 * norm_inf {
        return None;
    }

    let x = lu.solve(b)?;
    if !x.iter().all(|v| v.is_finite()) {
        return None;
    }
    let residual = (a * &x - b).norm();
    if residual > 1e-8 * b.norm().max(f64::MIN_POSITIVE) {
        return None;
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_well_conditioned_systems() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let b = DVector::from_row_slice(&[2.0, 8.0]);
        let x = lu_solve_checked(&a, &b).unwrap();
        assert_relative_eq!(x, DVector::from_row_slice(&[1.0, 2.0]), epsilon = 1e-12);
    }

    #[test]
    fn rejects_rank_deficient_systems() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_row_slice(&[1.0, 2.0]);
        assert!(lu_solve_checked(&a, &b).is_none());
    }
}
