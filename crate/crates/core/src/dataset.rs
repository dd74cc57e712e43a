//! Labeled observation matrices.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An `N x P` observation matrix with one class label per row.
///
/// Labels are `0..G` internally; front ends map external class names onto
/// this range in first-appearance order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    x: DMatrix<f64>,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(x: DMatrix<f64>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != x.nrows() {
            return Err(Error::validation(format!(
                "{} labels for {} rows",
                labels.len(),
                x.nrows()
            )));
        }
        if n_classes == 0 {
            return Err(Error::validation("need at least one class"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::validation(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        Ok(Self {
            x,
            labels,
            n_classes,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> DVector<f64> {
        self.x.row(i).transpose()
    }

    /// Rows belonging to class `g`.
    pub fn class_rows(&self, g: usize) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == g)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// A copy of the dataset restricted to the given columns, in the given
    /// order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        for &c in cols {
            if c >= self.p() {
                return Err(Error::validation(format!(
                    "column {c} out of range for {} columns",
                    self.p()
                )));
            }
        }
        let x = DMatrix::from_fn(self.n(), cols.len(), |i, j| self.x[(i, cols[j])]);
        Ok(Self {
            x,
            labels: self.labels.clone(),
            n_classes: self.n_classes,
        })
    }
}
