//! Multivariate normal log-densities.
//!
//! Densities are evaluated through a triangular factorization of the
//! covariance. When the covariance is (numerically) rank deficient the
//! density of the singular normal is used instead: the quadratic form is
//! taken under the generalized inverse and the normalizing constant uses
//! the product of the nonzero eigenvalues only.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

const LN_2PI: f64 = 1.8378770664093453;

enum Kernel {
    /// Zero-dimensional density: log-density identically 0.
    Point,
    /// `l_inv_t` is L^-1 where Sigma = L L'; quadratic form is |L^-1 r|^2.
    Full { l_inv: DMatrix<f64>, log_norm: f64 },
    /// Rows are (1/sqrt(omega_k)) q_k' for the nonzero eigenpairs.
    Singular { proj: DMatrix<f64>, log_norm: f64 },
}

/// A Gaussian density with precomputed factorization for repeated
/// evaluation.
pub struct GaussianDensity {
    mu: DVector<f64>,
    kernel: Kernel,
}

impl GaussianDensity {
    pub fn new(mu: DVector<f64>, sigma: &DMatrix<f64>) -> Result<Self> {
        let d = mu.len();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(Error::validation(format!(
                "covariance is {}x{} but mean has length {d}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if d == 0 {
            return Ok(Self {
                mu,
                kernel: Kernel::Point,
            });
        }
        linalg::check_square_symmetric(sigma, 1e-8, "covariance")?;
        if let Some(chol) = nalgebra::Cholesky::new(sigma.clone()) {
            let diag = chol.l_dirty().diagonal();
            let dmax = diag.max();
            let dmin = diag.min();
            // a factorization that only succeeded on rounding noise is
            // rejected in favor of the g-inverse path
            if dmin > 0.0 && dmin * dmin > dmax * dmax * linalg::GINV_REL_TOL {
                let log_det: f64 = 2.0 * diag.iter().map(|v| libm::log(*v)).sum::<f64>();
                let mut l_inv = DMatrix::identity(d, d);
                chol.l_dirty().solve_lower_triangular_mut(&mut l_inv);
                let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
                return Ok(Self {
                    mu,
                    kernel: Kernel::Full { l_inv, log_norm },
                });
            }
        }
        // singular or indefinite-by-rounding: keep the clearly nonzero
        // eigendirections and work under the g-inverse
        let (values, vectors) = linalg::sym_eigen(sigma);
        let cutoff = values[0].max(0.0) * linalg::GINV_REL_TOL;
        let kept: Vec<usize> = (0..d).filter(|&i| values[i] > cutoff).collect();
        let k = kept.len();
        let mut proj = DMatrix::zeros(k, d);
        let mut log_det = 0.0;
        for (row, &i) in kept.iter().enumerate() {
            log_det += libm::log(values[i]);
            let scale = 1.0 / libm::sqrt(values[i]);
            for c in 0..d {
                proj[(row, c)] = vectors[(c, i)] * scale;
            }
        }
        let log_norm = -0.5 * (k as f64 * LN_2PI + log_det);
        Ok(Self {
            mu,
            kernel: Kernel::Singular { proj, log_norm },
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// Log-density at a single point.
    pub fn logpdf(&self, x: &DVector<f64>) -> Result<f64> {
        if x.len() != self.mu.len() {
            return Err(Error::validation(format!(
                "point has length {}, expected {}",
                x.len(),
                self.mu.len()
            )));
        }
        let r = x - &self.mu;
        Ok(match &self.kernel {
            Kernel::Point => 0.0,
            Kernel::Full { l_inv, log_norm } => log_norm - 0.5 * (l_inv * &r).norm_squared(),
            Kernel::Singular { proj, log_norm } => log_norm - 0.5 * (proj * &r).norm_squared(),
        })
    }

    /// Log-densities of every row of an `M x d` matrix in one pass.
    pub fn log_densities(&self, rows: &DMatrix<f64>) -> Result<DVector<f64>> {
        let m = rows.nrows();
        if rows.ncols() != self.mu.len() {
            return Err(Error::validation(format!(
                "matrix has {} columns, expected {}",
                rows.ncols(),
                self.mu.len()
            )));
        }
        match &self.kernel {
            Kernel::Point => Ok(DVector::zeros(m)),
            Kernel::Full { l_inv, log_norm }
            | Kernel::Singular {
                proj: l_inv,
                log_norm,
            } => {
                // centered' is d x M; one matrix product gives all the
                // whitened residuals
                let mut centered = rows.transpose();
                for c in 0..m {
                    let mut col = centered.column_mut(c);
                    col -= &self.mu;
                }
                let z = l_inv * centered;
                Ok(DVector::from_fn(m, |j, _| {
                    log_norm - 0.5 * z.column(j).norm_squared()
                }))
            }
        }
    }
}

/// One-shot multivariate normal log-density.
pub fn gaussian_logpdf(x: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    GaussianDensity::new(mu.clone(), sigma)?.logpdf(x)
}
