//! Run reports: a JSON document with a stable schema and fixed float
//! rendering, so that re-running with the echoed configuration and seed
//! reproduces the output byte for byte. Wall-clock timing goes to stderr,
//! never into the report.

use std::io::Write;

use serde::Serialize;

use crate::error::{CliError, Result};

pub const TOOL_NAME: &str = "redda";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// JSON formatter rendering every float with 17 significant digits in
/// scientific notation.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> std::io::Result<()>
    where
        W: ?Sized + std::io::Write,
    {
        write!(writer, "{:.16e}", value as f64)
    }
}

/// Tool identification block.
#[derive(Serialize)]
pub struct ToolInfo {
    pub name: &'static str,
    pub version: &'static str,
}

/// Dataset summary echoed into every report that read a file.
#[derive(Serialize)]
pub struct DatasetSummary {
    pub path: String,
    pub n_rows: usize,
    pub n_features: usize,
    pub feature_names: Vec<String>,
    /// Class names with their 1-based model indices, in first-appearance
    /// order.
    pub label_mapping: Vec<LabelMapEntry>,
}

#[derive(Serialize)]
pub struct LabelMapEntry {
    pub class: String,
    pub index: usize,
}

/// A selected variable, reported by header name and 1-based column index.
#[derive(Serialize)]
pub struct VariableRef {
    pub index: usize,
    pub name: String,
}

pub fn variable_refs(indices: &[usize], names: &[String]) -> Vec<VariableRef> {
    indices
        .iter()
        .map(|&i| VariableRef {
            index: i + 1,
            name: names[i].clone(),
        })
        .collect()
}

/// The envelope every subcommand writes.
#[derive(Serialize)]
pub struct RunReport<C: Serialize, R: Serialize> {
    pub tool: ToolInfo,
    pub command: &'static str,
    /// Resolved configuration: re-running with these values reproduces
    /// every numeric field.
    pub invocation: C,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_dataset: Option<DatasetSummary>,
    pub result: R,
}

impl<C: Serialize, R: Serialize> RunReport<C, R> {
    pub fn new(command: &'static str, invocation: C, result: R) -> Self {
        Self {
            tool: ToolInfo {
                name: TOOL_NAME,
                version: TOOL_VERSION,
            },
            command,
            invocation,
            dataset: None,
            test_dataset: None,
            result,
        }
    }

    pub fn with_dataset(mut self, summary: DatasetSummary) -> Self {
        self.dataset = Some(summary);
        self
    }

    pub fn with_test_dataset(mut self, summary: DatasetSummary) -> Self {
        self.test_dataset = Some(summary);
        self
    }

    /// Serializes with the fixed float rendering and writes to `--out`
    /// (or standard output), newline terminated.
    pub fn write(&self, out: Option<&str>) -> Result<()> {
        let mut bytes = Vec::new();
        let mut serializer = serde_json::Serializer::with_formatter(&mut bytes, FixedFloats);
        self.serialize(&mut serializer)
            .map_err(|e| CliError::io(format!("report serialization failed: {e}")))?;
        bytes.push(b'\n');
        match out {
            Some(path) => {
                std::fs::write(path, &bytes)
                    .map_err(|e| CliError::io(format!("cannot write {path}: {e}")))?;
            }
            None => {
                std::io::stdout().write_all(&bytes)?;
            }
        }
        Ok(())
    }
}

pub fn dataset_summary(path: &str, data: &crate::dataio::LoadedData) -> DatasetSummary {
    DatasetSummary {
        path: path.to_owned(),
        n_rows: data.matrix.nrows(),
        n_features: data.feature_names.len(),
        feature_names: data.feature_names.clone(),
        label_mapping: data
            .class_names
            .iter()
            .enumerate()
            .map(|(i, c)| LabelMapEntry {
                class: c.clone(),
                index: i + 1,
            })
            .collect(),
    }
}
