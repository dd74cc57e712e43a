//! Keep/discard bookkeeping for impartial trimming.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Number of rows discarded at trimming level `gamma`: `floor(N * gamma)`,
/// with a small guard against floating-point representation of the
/// product (e.g. `100 * 0.29` evaluating just below 29).
pub fn trimmed_row_count(n: usize, gamma: f64) -> usize {
    libm::floor(n as f64 * gamma + 1e-9) as usize
}

/// A binary keep vector over the training rows plus the trimming level
/// that produced it.
///
/// States built by a concentration or re-trimming step carry exactly
/// `floor(N * gamma)` zeros (and therefore `ceil(N * (1 - gamma))` ones).
/// Initialization masks — the small row subsets a robust start estimates
/// its first parameters on — are also represented by this type but do not
/// satisfy the count identity; [`TrimmingState::new`] enforces it,
/// [`TrimmingState::from_mask`] does not.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmingState {
    keep: Vec<bool>,
    gamma: f64,
}

impl TrimmingState {
    /// Builds a state and checks the exact-count invariant.
    pub fn new(keep: Vec<bool>, gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        let n = keep.len();
        let zeros = keep.iter().filter(|k| !**k).count();
        let expect = trimmed_row_count(n, gamma);
        if zeros != expect {
            return Err(Error::validation(format!(
                "keep vector discards {zeros} rows, expected floor({n} * {gamma}) = {expect}"
            )));
        }
        Ok(Self { keep, gamma })
    }

    /// Builds a state without the exact-count check (initialization masks).
    pub fn from_mask(keep: Vec<bool>, gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        Ok(Self { keep, gamma })
    }

    /// All rows kept; the state of any fit at `gamma = 0`.
    pub fn keep_all(n: usize) -> Self {
        Self {
            keep: vec![true; n],
            gamma: 0.0,
        }
    }

    /// Discards the `floor(N * gamma)` rows with the lowest scores.
    /// Ties are resolved by discarding the lowest row index first.
    pub fn discard_lowest(scores: &[f64], gamma: f64) -> Result<Self> {
        validate_gamma(gamma)?;
        let n = scores.len();
        let drop = trimmed_row_count(n, gamma);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
        let mut keep = vec![true; n];
        for &i in order.iter().take(drop) {
            keep[i] = false;
        }
        Ok(Self { keep, gamma })
    }

    pub fn n(&self) -> usize {
        self.keep.len()
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_kept(&self, i: usize) -> bool {
        self.keep[i]
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn kept_count(&self) -> usize {
        self.keep.iter().filter(|k| **k).count()
    }

    pub fn trimmed_count(&self) -> usize {
        self.n() - self.kept_count()
    }

    pub fn kept_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.keep[i]).collect()
    }

    pub fn trimmed_indices(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| !self.keep[i]).collect()
    }

    /// Rebuilds a state from the list of trimmed row indices.
    pub fn from_trimmed_indices(n: usize, trimmed: &[usize], gamma: f64) -> Result<Self> {
        let mut keep = vec![true; n];
        for &i in trimmed {
            if i >= n {
                return Err(Error::validation(format!("trimmed index {i} out of range")));
            }
            keep[i] = false;
        }
        Self::new(keep, gamma)
    }
}

fn validate_gamma(gamma: f64) -> Result<()> {
    if !(0.0..0.5).contains(&gamma) {
        return Err(Error::validation(format!(
            "trimming level must lie in [0, 0.5), got {gamma}"
        )));
    }
    Ok(())
}
