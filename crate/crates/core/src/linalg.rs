//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_RTOL: f64 = 1e-9;

fn singular_values(a: &DMatrix<f64>) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(0);
    }
    a.clone().svd(false, false).singular_values
}

/// Numerical rank: singular values above `RANK_RTOL * sigma_max`.
pub fn rank(a: &DMatrix<f64>) -> usize {
    let s = singular_values(a);
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > RANK_RTOL * smax).count()
}

/// Orthonormal basis (as columns) of the null space of `a`, an `r x c` matrix.
///
/// `a` is zero-padded to at least `c` rows so the SVD returns a full set of
/// right singular vectors.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    let c = a.ncols();
    if c == 0 {
        return DMatrix::zeros(0, 0);
    }
    if a.nrows() == 0 {
        return DMatrix::identity(c, c);
    }
    let rows = a.nrows().max(c);
    let mut padded = DMatrix::zeros(rows, c);
    padded.view_mut((0, 0), (a.nrows(), c)).copy_from(a);
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let s = &svd.singular_values;
    let smax = s.iter().cloned().fold(0.0_f64, f64::max);
    let cols: Vec<DVector<f64>> =
        (0..c).filter(|&i| smax == 0.0 || s[i] <= RANK_RTOL * smax).map(|i| vt.row(i).transpose()).collect();
    if cols.is_empty() {
        DMatrix::zeros(c, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Solves `a x = b` for square, numerically nonsingular `a`.
pub fn solve_square(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.nrows() != a.ncols() || rank(a) < a.ncols() {
        return None;
    }
    a.clone().lu().solve(b)
}

/// Least-squares solution of `a x = b` for `a` with full column rank.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if rank(a) < a.ncols() {
        return None;
    }
    if a.ncols() == 0 {
        return Some(DVector::zeros(0));
    }
    a.clone().svd(true, true).solve(b, 0.0).ok()
}

/// Minimum-norm least-squares solution of `a x = b` for any shape of `a`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if a.ncols() == 0 {
        return Some(DVector::zeros(0));
    }
    if a.nrows() == 0 {
        return Some(DVector::zeros(a.ncols()));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, RANK_RTOL * smax).ok()
}

/// Inverse of a square nonsingular matrix.
pub fn inverse(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if a.nrows() != a.ncols() || rank(a) < a.ncols() {
        return None;
    }
    a.clone().try_inverse()
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

pub fn max_abs_mat(a: &DMatrix<f64>) -> f64 {
    max_abs(a.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_null_space_of_wide_matrix() {
        let a = DMatrix::from_row_slice(1, 3, &[1.0, -1.0, 0.0]);
        assert_eq!(rank(&a), 1);
        let ns = null_space(&a);
        assert_eq!(ns.ncols(), 2);
        assert!(max_abs_mat(&(&a * &ns)) < 1e-14);
    }

    #[test]
    fn null_space_of_empty_and_full_rank() {
        assert_eq!(null_space(&DMatrix::zeros(0, 3)).ncols(), 3);
        assert_eq!(null_space(&DMatrix::identity(3, 3)).ncols(), 0);
        assert_eq!(null_space(&DMatrix::zeros(2, 2)).ncols(), 2);
    }

    #[test]
    fn solves() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let x = solve_square(&a, &DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        let sing = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve_square(&sing, &DVector::from_vec(vec![1.0, 1.0])).is_none());
        let tall = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        let y = lstsq(&tall, &DVector::from_vec(vec![2.0, 0.0])).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-15);
    }
}
