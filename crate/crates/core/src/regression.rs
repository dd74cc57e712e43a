//! Trimmed linear regression and regressor-subset choice.
//!
//! The regression of a proposed variable on a subset of the included ones
//! is the conditional part of the no-grouping model. Its robust estimate
//! alternates ordinary least squares on the kept rows with re-trimming of
//! the largest squared residuals, in the manner of least trimmed squares.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::trimming::TrimmingState;

/// Residual variance floor; an exact linear fit would otherwise send the
/// conditional log-density to infinity.
pub const SIGMA2_FLOOR: f64 = 1e-12;

const LN_2PI: f64 = 1.8378770664093453;

/// Fitted linear regression with intercept.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegressionParams {
    pub intercept: f64,
    /// One coefficient per column of the design (zero for columns dropped
    /// as collinear).
    pub coefficients: Vec<f64>,
    /// Maximum-likelihood residual variance on the kept rows, divisor
    /// `ceil(N(1 - gamma))`.
    pub sigma2: f64,
    /// Identities of the regressor columns (indices into the full
    /// variable set).
    pub regressors: Vec<usize>,
}

impl RegressionParams {
    /// Conditional mean `intercept + coefficients' x`.
    pub fn mean(&self, x_row: &[f64]) -> f64 {
        let mut m = self.intercept;
        for (c, v) in self.coefficients.iter().zip(x_row) {
            m += c * v;
        }
        m
    }

    /// Gaussian log-density of `y` given the regressor row.
    pub fn log_density(&self, y: f64, x_row: &[f64]) -> f64 {
        let r = y - self.mean(x_row);
        -0.5 * (LN_2PI + libm::log(self.sigma2)) - 0.5 * r * r / self.sigma2
    }
}

/// Greedily drops design columns that are numerically collinear with the
/// ones before them (intercept first). Returns the surviving column
/// indices of `x`.
fn independent_columns(x: &DMatrix<f64>, rows: &[usize]) -> Vec<usize> {
    let n = rows.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    // the intercept direction is always in the basis
    let ones = DVector::from_element(n, 1.0 / libm::sqrt(n as f64));
    basis.push(ones);
    let mut kept = Vec::new();
    for c in 0..x.ncols() {
        let mut v = DVector::from_fn(n, |i, _| x[(rows[i], c)]);
        let orig = v.norm();
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let tol = 1e-10 * orig.max(1.0) * (n as f64);
        if v.norm() > tol {
            let norm = v.norm();
            basis.push(v / norm);
            kept.push(c);
        }
    }
    kept
}

/// Ordinary least squares of `y` on the kept rows of `x` plus intercept.
/// Collinear columns are dropped and get zero coefficients.
pub(crate) fn ols_kept(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    rows: &[usize],
) -> Result<(f64, Vec<f64>)> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::estimation(
            "need at least two kept rows for a regression",
        ));
    }
    let usable = independent_columns(x, rows);
    let k = usable.len();
    let mut design = DMatrix::zeros(n, k + 1);
    let mut rhs = DVector::zeros(n);
    for (i, &r) in rows.iter().enumerate() {
        design[(i, 0)] = 1.0;
        for (j, &c) in usable.iter().enumerate() {
            design[(i, j + 1)] = x[(r, c)];
        }
        rhs[i] = y[r];
    }
    // thin-QR least squares: R x = Q' y
    let qr = design.qr();
    let qty = qr.q().transpose() * rhs;
    let solution = qr
        .r()
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::estimation("least squares solve failed on kept rows"))?;
    let mut coefficients = vec![0.0; x.ncols()];
    for (j, &c) in usable.iter().enumerate() {
        coefficients[c] = solution[j + 1];
    }
    Ok((solution[0], coefficients))
}

fn squared_residuals(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    intercept: f64,
    coefficients: &[f64],
) -> Vec<f64> {
    (0..y.len())
        .map(|i| {
            let mut m = intercept;
            for (c, coef) in coefficients.iter().enumerate() {
                m += coef * x[(i, c)];
            }
            let r = y[i] - m;
            r * r
        })
        .collect()
}

/// Least-trimmed-squares style regression: alternates least squares on
/// the kept rows with re-trimming of the `floor(N * gamma)` largest
/// squared residuals until the kept set stabilizes.
///
/// `regressor_ids` records which variables the design columns are.
pub fn trimmed_regression(
    y: &DVector<f64>,
    x: &DMatrix<f64>,
    regressor_ids: &[usize],
    gamma: f64,
    keep_init: &TrimmingState,
    max_iter: usize,
) -> Result<RegressionParams> {
    if y.len() != x.nrows() || keep_init.n() != y.len() {
        return Err(Error::validation(
            "response, design and keep lengths differ",
        ));
    }
    if regressor_ids.len() != x.ncols() {
        return Err(Error::validation(format!(
            "{} regressor ids for {} design columns",
            regressor_ids.len(),
            x.ncols()
        )));
    }
    let n = y.len();
    let mut rows = keep_init.kept_indices();
    let mut fit = ols_kept(y, x, &rows)?;
    let mut prev: Option<Vec<usize>> = None;
    for _ in 0..max_iter {
        let sq = squared_residuals(y, x, fit.0, &fit.1);
        // discard the largest residuals: lowest score = -residual^2
        let neg: Vec<f64> = sq.iter().map(|r| -r).collect();
        let state = TrimmingState::discard_lowest(&neg, gamma)?;
        let new_rows = state.kept_indices();
        if new_rows == rows {
            break;
        }
        if prev.as_deref() == Some(new_rows.as_slice()) {
            // 2-cycle on tied residuals; both states fit equally well
            rows = new_rows;
            fit = ols_kept(y, x, &rows)?;
            break;
        }
        prev = Some(rows);
        rows = new_rows;
        fit = ols_kept(y, x, &rows)?;
    }
    let sq = squared_residuals(y, x, fit.0, &fit.1);
    let kept_target = n - crate::trimming::trimmed_row_count(n, gamma);
    let rss: f64 = rows.iter().map(|&i| sq[i]).sum();
    let sigma2 = (rss / kept_target as f64).max(SIGMA2_FLOOR);
    Ok(RegressionParams {
        intercept: fit.0,
        coefficients: fit.1,
        sigma2,
        regressors: regressor_ids.to_vec(),
    })
}

/// Gaussian log-likelihood of a regression with MLE variance on `n` rows
/// and residual sum `rss`.
fn profile_loglik(n: usize, rss: f64) -> f64 {
    let nf = n as f64;
    let sigma2 = (rss / nf).max(SIGMA2_FLOOR);
    -0.5 * nf * (LN_2PI + libm::log(sigma2) + rss / (nf * sigma2))
}

/// Cross-products of `[1 | X_included]` and the target over the kept
/// rows. Every candidate regressor subset is solved from submatrices of
/// this single Gram matrix, which keeps exhaustive subset search cheap.
struct GramSystem {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    n: usize,
}

impl GramSystem {
    fn build(y: &DVector<f64>, x: &DMatrix<f64>, included: &[usize], rows: &[usize]) -> Self {
        let m = included.len();
        let mut design = DMatrix::zeros(rows.len(), m + 1);
        let mut yk = DVector::zeros(rows.len());
        for (i, &r) in rows.iter().enumerate() {
            design[(i, 0)] = 1.0;
            for (j, &c) in included.iter().enumerate() {
                design[(i, j + 1)] = x[(r, c)];
            }
            yk[i] = y[r];
        }
        let gram = design.transpose() * &design;
        let xty = design.transpose() * &yk;
        GramSystem {
            gram,
            xty,
            yty: yk.norm_squared(),
            n: rows.len(),
        }
    }

    /// Residual sum of squares of the subset regression (intercept plus
    /// the columns at `positions`, 1-based into the Gram layout). `None`
    /// when the subsystem is numerically singular.
    fn subset_rss(&self, positions: &[usize]) -> Option<f64> {
        let k = positions.len() + 1;
        let mut g = DMatrix::zeros(k, k);
        let mut b = DVector::zeros(k);
        let idx = |slot: usize| if slot == 0 { 0 } else { positions[slot - 1] };
        for i in 0..k {
            b[i] = self.xty[idx(i)];
            for j in 0..k {
                g[(i, j)] = self.gram[(idx(i), idx(j))];
            }
        }
        let chol = nalgebra::Cholesky::new(g)?;
        let beta = chol.solve(&b);
        Some((self.yty - beta.dot(&b)).max(0.0))
    }

    fn subset_bic(&self, positions: &[usize]) -> Option<f64> {
        let rss = self.subset_rss(positions)?;
        let ll = profile_loglik(self.n, rss);
        let v = positions.len() as f64 + 2.0;
        Some(2.0 * ll - v * libm::log(self.n as f64))
    }
}

/// Upper bound on the included-set size for exhaustive subset search;
/// larger sets fall back to forward stepwise selection.
pub const EXHAUSTIVE_REGRESSOR_LIMIT: usize = 10;

/// Chooses the regressor subset `r` of `included` for the proposed
/// variable by BIC over regressions computed on the kept rows: exhaustive
/// enumeration up to [`EXHAUSTIVE_REGRESSOR_LIMIT`] included variables,
/// forward stepwise beyond. Returns column indices into the full variable
/// set. An empty `included` yields the pure intercept model.
pub fn select_regressors(
    p_var: usize,
    included: &[usize],
    data: &DMatrix<f64>,
    keep: &TrimmingState,
) -> Result<Vec<usize>> {
    if included.is_empty() {
        return Ok(Vec::new());
    }
    if keep.n() != data.nrows() {
        return Err(Error::validation("keep vector length does not match rows"));
    }
    let rows = keep.kept_indices();
    if rows.len() < 3 {
        return Ok(Vec::new());
    }
    let y = DVector::from_fn(data.nrows(), |i, _| data[(i, p_var)]);
    let system = GramSystem::build(&y, data, included, &rows);
    let m = included.len();
    let intercept_only = system
        .subset_bic(&[])
        .ok_or_else(|| Error::estimation("degenerate intercept-only regression"))?;

    let positions = if m <= EXHAUSTIVE_REGRESSOR_LIMIT {
        // subsets enumerated in (size, lexicographic) order; strict
        // improvement keeps the smallest, lowest-indexed optimum
        let mut best_pos: Vec<usize> = Vec::new();
        let mut best = intercept_only;
        let mut masks: Vec<u32> = (1..(1u32 << m)).collect();
        masks.sort_by_key(|mask| (mask.count_ones(), *mask));
        for mask in masks {
            let pos: Vec<usize> = (0..m)
                .filter(|j| mask & (1 << j) != 0)
                .map(|j| j + 1)
                .collect();
            if let Some(bic) = system.subset_bic(&pos) {
                if bic > best {
                    best = bic;
                    best_pos = pos;
                }
            }
        }
        best_pos
    } else {
        let mut chosen: Vec<usize> = Vec::new();
        let mut best = intercept_only;
        loop {
            let mut improvement: Option<(usize, f64)> = None;
            for cand in (1..=m).filter(|c| !chosen.contains(c)) {
                let mut pos = chosen.clone();
                pos.push(cand);
                pos.sort_unstable();
                if let Some(bic) = system.subset_bic(&pos) {
                    if bic > best && improvement.map_or(true, |(_, b)| bic > b) {
                        improvement = Some((cand, bic));
                    }
                }
            }
            match improvement {
                Some((cand, bic)) => {
                    chosen.push(cand);
                    chosen.sort_unstable();
                    best = bic;
                }
                None => break,
            }
        }
        chosen
    };
    Ok(positions.into_iter().map(|p| included[p - 1]).collect())
}
