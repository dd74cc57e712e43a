//! Delimited-text dataset ingestion.
//!
//! Expected layout: one header row; one optional label column (string
//! classes, mapped to `1..G` in first-appearance order); one optional
//! row-identifier column; every remaining column numeric. Any cell that
//! does not parse as a finite number is an error naming its coordinates
//! (no imputation).

use redda_core::nalgebra::DMatrix;
use redda_core::LabeledDataset;

use crate::error::{CliError, Result};

/// A parsed dataset plus the naming metadata the reports echo.
pub struct LoadedData {
    /// Feature matrix, columns in file order (label/id columns removed).
    pub matrix: DMatrix<f64>,
    /// Feature column names, aligned with the matrix columns.
    pub feature_names: Vec<String>,
    /// Class names in first-appearance order (empty without labels).
    pub class_names: Vec<String>,
    /// Per-row labels as indices into `class_names`.
    pub labels: Option<Vec<usize>>,
    /// Row identifiers: the id column when given, else 1-based row
    /// numbers.
    pub row_ids: Vec<String>,
}

impl LoadedData {
    /// The labeled dataset (labels required).
    pub fn dataset(&self) -> Result<LabeledDataset> {
        let labels = self
            .labels
            .clone()
            .ok_or_else(|| CliError::validation("this file has no label column"))?;
        LabeledDataset::new(self.matrix.clone(), labels, self.class_names.len()).map_err(Into::into)
    }

    /// Positions of the named or 1-based-indexed variables among the
    /// feature columns.
    pub fn resolve_variables(&self, spec: &str) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for token in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if let Ok(idx) = token.parse::<usize>() {
                if idx == 0 || idx > self.feature_names.len() {
                    return Err(CliError::validation(format!(
                        "variable index {idx} out of range 1..={}",
                        self.feature_names.len()
                    )));
                }
                out.push(idx - 1);
            } else if let Some(pos) = self.feature_names.iter().position(|n| n == token) {
                out.push(pos);
            } else {
                return Err(CliError::validation(format!("unknown variable {token:?}")));
            }
        }
        if out.is_empty() {
            return Err(CliError::validation("empty variable list"));
        }
        Ok(out)
    }
}

/// Reads a delimited text file into a feature matrix plus labels.
pub fn load_dataset(
    path: &str,
    label_column: Option<&str>,
    id_column: Option<&str>,
) -> Result<LoadedData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::io(format!("cannot read {path}: {e}")))?;

    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::io(format!("bad header in {path}: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();

    let label_idx = match label_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::validation(format!("label column {name:?} not found in {path}"))
        })?),
        None => None,
    };
    let id_idx = match id_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::validation(format!("id column {name:?} not found in {path}"))
        })?),
        None => None,
    };
    if label_idx.is_some() && label_idx == id_idx {
        return Err(CliError::validation("label and id columns must differ"));
    }

    let feature_cols: Vec<usize> = (0..headers.len())
        .filter(|c| Some(*c) != label_idx && Some(*c) != id_idx)
        .collect();
    if feature_cols.is_empty() {
        return Err(CliError::validation(format!(
            "{path} has no feature columns"
        )));
    }
    let feature_names: Vec<String> = feature_cols.iter().map(|&c| headers[c].clone()).collect();

    let mut values: Vec<f64> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut class_names: Vec<String> = Vec::new();
    let mut row_ids: Vec<String> = Vec::new();
    let mut n_rows = 0usize;

    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::io(format!("row {}: {e}", row + 2)))?;
        if record.len() != headers.len() {
            return Err(CliError::validation(format!(
                "row {} has {} fields, header has {}",
                row + 2,
                record.len(),
                headers.len()
            )));
        }
        for &c in &feature_cols {
            let cell = &record[c];
            let parsed = cell.parse::<f64>().ok().filter(|v| v.is_finite());
            match parsed {
                Some(v) => values.push(v),
                None => {
                    return Err(CliError::validation(format!(
                        "cell at row {}, column {:?} is not a finite number: {:?}",
                        row + 2,
                        headers[c],
                        cell
                    )))
                }
            }
        }
        if let Some(l) = label_idx {
            let name = record[l].to_owned();
            if name.is_empty() {
                return Err(CliError::validation(format!(
                    "empty label at row {}, column {:?}",
                    row + 2,
                    headers[l]
                )));
            }
            let idx = match class_names.iter().position(|c| *c == name) {
                Some(i) => i,
                None => {
                    class_names.push(name);
                    class_names.len() - 1
                }
            };
            labels.push(idx);
        }
        row_ids.push(match id_idx {
            Some(c) => record[c].to_owned(),
            None => (row + 1).to_string(),
        });
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(CliError::validation(format!("{path} has no data rows")));
    }
    if label_idx.is_some() && class_names.len() < 2 {
        return Err(CliError::validation(format!(
            "training data needs at least two distinct labels, found {}",
            class_names.len()
        )));
    }

    let matrix = DMatrix::from_row_slice(n_rows, feature_cols.len(), &values);
    Ok(LoadedData {
        matrix,
        feature_names,
        class_names,
        labels: label_idx.map(|_| labels),
        row_ids,
    })
}
