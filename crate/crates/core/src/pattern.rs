//! The patterned multivariate-Gaussian family.
//!
//! Class covariances are constrained through the decomposition
//! `Sigma_g = lambda_g * D_g * A_g * D_g'` (volume, orientation, shape).
//! The three-letter code states whether volume/shape/orientation are equal
//! (`E`) or varying (`V`) across classes, with `I` marking axis-aligned
//! shapes. The eight codes with closed-form constrained maximum-likelihood
//! estimators are supported.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::linalg;
use crate::trimming::TrimmingState;

/// Covariance constraint code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PatternedModel {
    /// Spherical, equal volume.
    Eii,
    /// Spherical, varying volume.
    Vii,
    /// Diagonal, equal volume and shape.
    Eei,
    /// Diagonal, varying volume, equal shape.
    Vei,
    /// Diagonal, equal volume, varying shape.
    Evi,
    /// Diagonal, varying volume and shape.
    Vvi,
    /// Full, all equal (homoscedastic).
    Eee,
    /// Full, all varying (heteroscedastic).
    Vvv,
}

/// Pooled covariance structure implied by a model code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PooledForm {
    Ellipsoidal,
    Diagonal,
    Spherical,
}

impl PatternedModel {
    pub const ALL: [PatternedModel; 8] = [
        PatternedModel::Eii,
        PatternedModel::Vii,
        PatternedModel::Eei,
        PatternedModel::Vei,
        PatternedModel::Evi,
        PatternedModel::Vvi,
        PatternedModel::Eee,
        PatternedModel::Vvv,
    ];

    pub fn code(&self) -> &'static str {
        match self {
            PatternedModel::Eii => "EII",
            PatternedModel::Vii => "VII",
            PatternedModel::Eei => "EEI",
            PatternedModel::Vei => "VEI",
            PatternedModel::Evi => "EVI",
            PatternedModel::Vvi => "VVI",
            PatternedModel::Eee => "EEE",
            PatternedModel::Vvv => "VVV",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| {
                Error::validation(format!(
                    "unknown model code {s:?}; supported: EII VII EEI VEI EVI VVI EEE VVV"
                ))
            })
    }

    /// Number of free covariance parameters for dimension `p` and `g`
    /// classes.
    pub fn covariance_param_count(&self, p: usize, g: usize) -> usize {
        if p == 0 {
            return 0;
        }
        match self {
            PatternedModel::Eii => 1,
            PatternedModel::Vii => g,
            PatternedModel::Eei => p,
            PatternedModel::Vei => g + (p - 1),
            PatternedModel::Evi => 1 + g * (p - 1),
            PatternedModel::Vvi => g * p,
            PatternedModel::Eee => p * (p + 1) / 2,
            PatternedModel::Vvv => g * p * (p + 1) / 2,
        }
    }

    /// Total parameter count of the classifier: mixing proportions, means
    /// and covariance parameters.
    pub fn param_count(&self, p: usize, g: usize) -> usize {
        (g - 1) + g * p + self.covariance_param_count(p, g)
    }

    pub fn pooled_form(&self) -> PooledForm {
        match self {
            PatternedModel::Eee | PatternedModel::Vvv => PooledForm::Ellipsoidal,
            PatternedModel::Eei
            | PatternedModel::Vei
            | PatternedModel::Evi
            | PatternedModel::Vvi => PooledForm::Diagonal,
            PatternedModel::Eii | PatternedModel::Vii => PooledForm::Spherical,
        }
    }
}

impl core::fmt::Display for PatternedModel {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.code())
    }
}

/// Volume/orientation/shape factorization of a covariance matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Volume `lambda = det(Sigma)^(1/P)`.
    pub volume: f64,
    /// Orthogonal matrix of eigenvectors (orientation).
    pub orientation: DMatrix<f64>,
    /// Diagonal of the unit-determinant shape matrix, sorted descending.
    pub shape: DVector<f64>,
}

impl EigenDecomposition {
    /// Rebuilds `lambda * D * A * D'`.
    pub fn recompose(&self) -> DMatrix<f64> {
        let a = DMatrix::from_diagonal(&self.shape);
        &self.orientation * a * self.orientation.transpose() * self.volume
    }
}

/// Decomposes a symmetric positive-definite matrix into volume,
/// orientation and unit-determinant shape.
pub fn decompose_covariance(sigma: &DMatrix<f64>) -> Result<EigenDecomposition> {
    linalg::check_square_symmetric(sigma, 1e-10, "covariance")?;
    if sigma.nrows() == 0 {
        return Err(Error::validation("cannot decompose an empty matrix"));
    }
    let (values, vectors) = linalg::sym_eigen(sigma);
    let p = values.len();
    if values[p - 1] < -1e-10 * values[0].abs().max(1.0) {
        return Err(Error::validation(format!(
            "covariance has negative eigenvalue {:e}",
            values[p - 1]
        )));
    }
    // volume via the log-mean of the eigenvalues; a zero eigenvalue leaves
    // the unit-determinant shape undefined
    if values[p - 1] <= 0.0 {
        return Err(Error::DegenerateCovariance(String::from(
            "covariance has zero volume; its shape factor is undefined",
        )));
    }
    let log_volume = values.iter().map(|v| libm::log(*v)).sum::<f64>() / p as f64;
    let volume = libm::exp(log_volume);
    let shape = values.map(|v| v / volume);
    Ok(EigenDecomposition {
        volume,
        orientation: vectors,
        shape,
    })
}

/// Estimated classifier parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassParams {
    /// Mixing proportions, one per class, summing to one.
    pub tau: Vec<f64>,
    /// Class mean vectors.
    pub mu: Vec<DVector<f64>>,
    /// Class covariance matrices satisfying the model constraint.
    pub sigma: Vec<DMatrix<f64>>,
    /// Pooled mean over all kept rows (maximum-likelihood subset loop).
    pub pooled_mu: Option<DVector<f64>>,
    /// Pooled covariance in the form implied by the model code.
    pub pooled_sigma: Option<DMatrix<f64>>,
}

impl ClassParams {
    pub fn n_classes(&self) -> usize {
        self.tau.len()
    }

    pub fn dim(&self) -> usize {
        self.mu.first().map_or(0, |m| m.len())
    }

    /// Restriction of every class parameter (and pooled parameters, when
    /// present) to the columns in `idx`.
    pub fn restrict(&self, idx: &[usize]) -> ClassParams {
        ClassParams {
            tau: self.tau.clone(),
            mu: self
                .mu
                .iter()
                .map(|m| linalg::restrict_vec(m, idx))
                .collect(),
            sigma: self
                .sigma
                .iter()
                .map(|s| linalg::restrict(s, idx))
                .collect(),
            pooled_mu: self
                .pooled_mu
                .as_ref()
                .map(|m| linalg::restrict_vec(m, idx)),
            pooled_sigma: self.pooled_sigma.as_ref().map(|s| linalg::restrict(s, idx)),
        }
    }
}

struct ClassStats {
    counts: Vec<usize>,
    means: Vec<DVector<f64>>,
    scatters: Vec<DMatrix<f64>>,
    n_kept: usize,
}

fn class_stats(data: &LabeledDataset, keep: &TrimmingState) -> Result<ClassStats> {
    if keep.n() != data.n() {
        return Err(Error::validation(format!(
            "keep vector has length {}, dataset has {} rows",
            keep.n(),
            data.n()
        )));
    }
    let g = data.n_classes();
    let p = data.p();
    let mut counts = vec![0usize; g];
    let mut means = vec![DVector::zeros(p); g];
    for i in 0..data.n() {
        if keep.is_kept(i) {
            let l = data.labels()[i];
            counts[l] += 1;
            means[l] += data.x().row(i).transpose();
        }
    }
    for (cls, &c) in counts.iter().enumerate() {
        if c == 0 {
            return Err(Error::estimation(format!(
                "class {} has no kept rows",
                cls + 1
            )));
        }
        means[cls] /= c as f64;
    }
    let mut scatters = vec![DMatrix::zeros(p, p); g];
    for i in 0..data.n() {
        if keep.is_kept(i) {
            let l = data.labels()[i];
            let r = data.x().row(i).transpose() - &means[l];
            scatters[l].ger(1.0, &r, &r, 1.0);
        }
    }
    for s in &mut scatters {
        *s = linalg::symmetrize(s);
    }
    let n_kept = counts.iter().sum();
    Ok(ClassStats {
        counts,
        means,
        scatters,
        n_kept,
    })
}

/// Constrained covariance estimates from per-class scatter matrices.
///
/// `scatters[g]` is the scatter of the kept rows of class `g` about its
/// kept-row mean, `counts[g]` the kept class sizes and `n_kept` their sum.
/// Estimates are floored through [`linalg::floor_eigenvalues`] so that
/// trimmed subsamples never produce a singular fit.
fn sigma_estimates(
    model: PatternedModel,
    scatters: &[DMatrix<f64>],
    counts: &[usize],
    n_kept: usize,
) -> Result<Vec<DMatrix<f64>>> {
    let g = scatters.len();
    let p = scatters[0].nrows();
    if p == 0 {
        return Ok(vec![DMatrix::zeros(0, 0); g]);
    }
    let nf = n_kept as f64;
    let eye = DMatrix::<f64>::identity(p, p);

    let raw: Vec<DMatrix<f64>> = match model {
        PatternedModel::Vvv => scatters
            .iter()
            .zip(counts)
            .map(|(w, &n)| w / n as f64)
            .collect(),
        PatternedModel::Eee => {
            let pooled = scatters.iter().fold(DMatrix::zeros(p, p), |acc, w| acc + w) / nf;
            vec![pooled; g]
        }
        PatternedModel::Eii => {
            let trace: f64 = scatters.iter().map(|w| w.trace()).sum();
            let lambda = trace / (nf * p as f64);
            vec![&eye * lambda; g]
        }
        PatternedModel::Vii => scatters
            .iter()
            .zip(counts)
            .map(|(w, &n)| &eye * (w.trace() / (n as f64 * p as f64)))
            .collect(),
        PatternedModel::Eei => {
            let mut diag = DVector::zeros(p);
            for w in scatters {
                diag += w.diagonal();
            }
            diag /= nf;
            vec![DMatrix::from_diagonal(&diag); g]
        }
        PatternedModel::Vvi => scatters
            .iter()
            .zip(counts)
            .map(|(w, &n)| DMatrix::from_diagonal(&(w.diagonal() / n as f64)))
            .collect(),
        PatternedModel::Evi => {
            // shape_g = diag(W_g) normalized to unit determinant;
            // common volume lambda = sum_g det(diag W_g)^(1/p) / n_kept
            let mut shapes = Vec::with_capacity(g);
            let mut lambda = 0.0;
            for w in scatters {
                let d = w.diagonal();
                if d.iter().any(|v| *v <= 0.0) {
                    // degenerate class scatter: fall back to a floored
                    // diagonal so the shape normalization stays defined
                    let floor = linalg::ABS_FLOOR.max(d.max() * linalg::REL_FLOOR);
                    let d = d.map(|v| v.max(floor));
                    let log_det: f64 = d.iter().map(|v| libm::log(*v)).sum();
                    let vol = libm::exp(log_det / p as f64);
                    lambda += vol;
                    shapes.push(d / vol);
                } else {
                    let log_det: f64 = d.iter().map(|v| libm::log(*v)).sum();
                    let vol = libm::exp(log_det / p as f64);
                    lambda += vol;
                    shapes.push(d / vol);
                }
            }
            lambda /= nf;
            shapes
                .into_iter()
                .map(|b| DMatrix::from_diagonal(&(b * lambda)))
                .collect()
        }
        PatternedModel::Vei => {
            // alternate lambda_g = tr(W_g B^-1)/(p n_g) and
            // B = diag(sum_g W_g / lambda_g) normalized to unit determinant
            let mut shape = DVector::from_element(p, 1.0);
            let mut volumes = vec![1.0f64; g];
            for _ in 0..100 {
                for (i, w) in scatters.iter().enumerate() {
                    let mut tr = 0.0;
                    for k in 0..p {
                        tr += w[(k, k)] / shape[k];
                    }
                    volumes[i] = (tr / (p as f64 * counts[i] as f64)).max(linalg::ABS_FLOOR);
                }
                let mut new_shape = DVector::zeros(p);
                for (i, w) in scatters.iter().enumerate() {
                    new_shape += w.diagonal() / volumes[i];
                }
                let floor = linalg::ABS_FLOOR.max(new_shape.max() * linalg::REL_FLOOR);
                new_shape = new_shape.map(|v| v.max(floor));
                let log_det: f64 = new_shape.iter().map(|v| libm::log(*v)).sum();
                new_shape /= libm::exp(log_det / p as f64);
                let delta = (&new_shape - &shape).amax();
                shape = new_shape;
                if delta < 1e-8 {
                    break;
                }
            }
            volumes
                .iter()
                .map(|&l| DMatrix::from_diagonal(&(&shape * l)))
                .collect()
        }
    };

    Ok(raw
        .into_iter()
        .map(|s| linalg::floor_eigenvalues(&s).0)
        .collect())
}

/// Maximum-likelihood class parameters on the kept rows under the given
/// covariance constraint.
///
/// Proportions are kept class counts over the total kept count, means are
/// kept-row class means and covariances follow the code's constraint
/// structure exactly. Errors if any class has no kept rows.
pub fn estimate_class_params(
    data: &LabeledDataset,
    keep: &TrimmingState,
    model: PatternedModel,
) -> Result<ClassParams> {
    let stats = class_stats(data, keep)?;
    let sigma = sigma_estimates(model, &stats.scatters, &stats.counts, stats.n_kept)?;
    let tau: Vec<f64> = stats
        .counts
        .iter()
        .map(|&c| c as f64 / stats.n_kept as f64)
        .collect();
    Ok(ClassParams {
        tau,
        mu: stats.means,
        sigma,
        pooled_mu: None,
        pooled_sigma: None,
    })
}

/// Mean of the kept rows.
pub fn pooled_mean(x: &DMatrix<f64>, keep: &TrimmingState) -> Result<DVector<f64>> {
    if keep.n() != x.nrows() {
        return Err(Error::validation("keep vector length does not match rows"));
    }
    let kept = keep.kept_count();
    if kept == 0 {
        return Err(Error::estimation("no kept rows for the pooled mean"));
    }
    let mut mu = DVector::zeros(x.ncols());
    for i in 0..x.nrows() {
        if keep.is_kept(i) {
            mu += x.row(i).transpose();
        }
    }
    Ok(mu / kept as f64)
}

/// Pooled covariance of the kept rows about the pooled mean, in the form
/// implied by the model code: the full scatter for ellipsoidal codes, its
/// diagonal for diagonal codes, and the mean diagonal entry times the
/// identity for spherical codes.
pub fn pooled_covariance(
    x: &DMatrix<f64>,
    keep: &TrimmingState,
    model: PatternedModel,
) -> Result<DMatrix<f64>> {
    let p = x.ncols();
    let mu = pooled_mean(x, keep)?;
    let kept = keep.kept_count() as f64;
    let mut scatter = DMatrix::zeros(p, p);
    for i in 0..x.nrows() {
        if keep.is_kept(i) {
            let r = x.row(i).transpose() - &mu;
            scatter.ger(1.0, &r, &r, 1.0);
        }
    }
    let ell = linalg::symmetrize(&scatter) / kept;
    let formed = match model.pooled_form() {
        PooledForm::Ellipsoidal => ell,
        PooledForm::Diagonal => DMatrix::from_diagonal(&ell.diagonal()),
        PooledForm::Spherical => {
            if p == 0 {
                ell
            } else {
                DMatrix::identity(p, p) * (ell.diagonal().sum() / p as f64)
            }
        }
    };
    Ok(linalg::floor_eigenvalues(&formed).0)
}
