//! Small dense linear-algebra helpers shared by the estimators.
//!
//! Everything here operates on `f64` dynamic matrices. Covariance matrices
//! are kept symmetric positive definite through [`floor_eigenvalues`]:
//! eigenvalues are floored at `max(ABS_FLOOR, REL_FLOOR * lambda_max)` so
//! that fits on small trimmed subsamples never hand a singular matrix to a
//! triangular factorization.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Absolute eigenvalue floor applied when regularizing covariances.
pub const ABS_FLOOR: f64 = 1e-10;
/// Relative eigenvalue floor (times the largest eigenvalue).
pub const REL_FLOOR: f64 = 1e-8;

/// Relative cutoff below which an eigenvalue is treated as zero when
/// forming a generalized inverse.
pub const GINV_REL_TOL: f64 = 1e-10;

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub(crate) fn check_square_symmetric(m: &DMatrix<f64>, tol: f64, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::validation(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = max_asymmetry(m);
    if asym > tol {
        return Err(Error::validation(format!(
            "{what} must be symmetric (max |a_ij - a_ji| = {asym:e})"
        )));
    }
    Ok(())
}

/// Returns `(m + m') / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..m.nrows() {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending
/// order and a deterministic sign convention: in each eigenvector the
/// entry of largest magnitude is made positive.
pub fn sym_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let p = m.nrows();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let mut values = DVector::zeros(p);
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).clone_owned();
        let mut pivot = 0;
        for i in 1..p {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
        vectors.set_column(dst, &col);
    }
    (values, vectors)
}

/// Floors the eigenvalues of a symmetric matrix at
/// `max(ABS_FLOOR, REL_FLOOR * lambda_max)`.
///
/// Returns the (possibly unchanged) matrix and whether flooring was
/// applied. A matrix whose smallest eigenvalue already clears the floor is
/// returned as its symmetrized self, bit-for-bit, so well-conditioned
/// estimates are not perturbed by an eigen round trip.
pub fn floor_eigenvalues(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = symmetrize(m);
    if sym.nrows() == 0 {
        return (sym, false);
    }
    let (values, vectors) = sym_eigen(&sym);
    let floor = ABS_FLOOR.max(REL_FLOOR * values[0].max(0.0));
    if values[values.len() - 1] >= floor {
        return (sym, false);
    }
    let floored = values.map(|v| v.max(floor));
    let rebuilt = &vectors * DMatrix::from_diagonal(&floored) * vectors.transpose();
    (symmetrize(&rebuilt), true)
}

/// Restriction of a square matrix to the rows and columns in `idx`.
pub fn restrict(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    let k = idx.len();
    DMatrix::from_fn(k, k, |i, j| m[(idx[i], idx[j])])
}

/// Rectangular block `m[rows, cols]` of a square matrix.
pub fn cross_block(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Entries of a vector at the positions in `idx`.
pub fn restrict_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_fn(idx.len(), |i, _| v[idx[i]])
}

/// Cholesky factorization, reported as an estimation error when the input
/// is not positive definite.
pub fn cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| Error::estimation(format!("{what} is not positive definite")))
}

/// Log-determinant of a symmetric positive-definite matrix via its
/// triangular factorization.
pub fn log_det_spd(m: &DMatrix<f64>, what: &str) -> Result<f64> {
    if m.nrows() == 0 {
        return Ok(0.0);
    }
    let chol = cholesky(m, what)?;
    Ok(2.0
        * chol
            .l_dirty()
            .diagonal()
            .iter()
            .map(|d| libm::log(*d))
            .sum::<f64>())
}

/// Log-determinant with eigenvalue flooring for restrictions that may be
/// numerically singular. Returns the value and whether flooring kicked in.
pub fn log_det_floored(m: &DMatrix<f64>) -> (f64, bool) {
    if m.nrows() == 0 {
        return (0.0, false);
    }
    if let Some(chol) = Cholesky::new(symmetrize(m)) {
        let ld = 2.0
            * chol
                .l_dirty()
                .diagonal()
                .iter()
                .map(|d| libm::log(*d))
                .sum::<f64>();
        if ld.is_finite() {
            return (ld, false);
        }
    }
    let (values, _) = sym_eigen(m);
    let floor = ABS_FLOOR.max(REL_FLOOR * values[0].max(0.0));
    let ld = values.iter().map(|v| libm::log(v.max(floor))).sum();
    (ld, true)
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    Ok(cholesky(m, what)?.inverse())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn random_spd(p: usize, seed: u64) -> DMatrix<f64> {
        use rand::Rng;
        let mut rng = crate::seed::rng(seed, &[]);
        let a = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        &a * a.transpose() + DMatrix::identity(p, p) * 0.05
    }

    #[test]
    fn eigen_reconstructs_input() {
        let m = random_spd(6, 3);
        let (vals, vecs) = sym_eigen(&m);
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert_relative_eq!(m, rebuilt, epsilon = 1e-10);
        for i in 1..vals.len() {
            assert!(vals[i - 1] >= vals[i]);
        }
    }

    #[test]
    fn flooring_leaves_good_matrices_untouched() {
        let m = random_spd(4, 9);
        let (out, changed) = floor_eigenvalues(&m);
        assert!(!changed);
        assert_eq!(symmetrize(&m), out);
    }

    #[test]
    fn flooring_lifts_singular_directions() {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = 4.0;
        // rank-1 input: two zero eigenvalues must be lifted to the floor
        let (out, changed) = floor_eigenvalues(&m);
        assert!(changed);
        let (vals, _) = sym_eigen(&out);
        assert!(vals.iter().all(|v| *v > 0.0));
        assert_relative_eq!(vals[0], 4.0, epsilon = 1e-9);
    }

    #[test]
    fn log_det_matches_eigenvalue_sum() {
        let m = random_spd(5, 17);
        let (vals, _) = sym_eigen(&m);
        let expect: f64 = vals.iter().map(|v| v.ln()).sum();
        assert_relative_eq!(log_det_spd(&m, "m").unwrap(), expect, epsilon = 1e-10);
    }

    #[test]
    fn restriction_picks_rows_and_columns() {
        let m = DMatrix::from_row_slice(3, 3, &[1., 2., 3., 4., 5., 6., 7., 8., 9.]);
        let r = restrict(&m, &[0, 2]);
        assert_eq!(r, DMatrix::from_row_slice(2, 2, &[1., 3., 7., 9.]));
        let b = cross_block(&m, &[1], &[0, 2]);
        assert_eq!(b, DMatrix::from_row_slice(1, 2, &[4., 6.]));
    }
}
