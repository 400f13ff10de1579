//! Black-box models mapping dataset rows to output vectors.

use std::collections::HashMap;
use std::io::Write;
use std::process::{Command, Stdio};

use serde::{Deserialize, Serialize};

use super::dataset::{ColumnData, Dataset, Value};
use crate::error::{ClotError, Result};
use crate::matrix::Matrix;

/// A model `f_Y`. Must be deterministic and return one output row per input row.
pub trait Predictor: Send + Sync {
    fn output_dim(&self) -> usize;
    fn predict(&self, data: &Dataset) -> Result<Matrix>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    Identity,
    #[default]
    Logistic,
}

/// `coef · x` for a numeric column, or `coef · 1[x = level]` when `level` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearTerm {
    pub column: String,
    pub coef: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<Value>,
}

impl LinearTerm {
    pub fn numeric(column: &str, coef: f64) -> Self {
        LinearTerm {
            column: column.to_string(),
            coef,
            level: None,
        }
    }

    pub fn indicator(column: &str, level: impl Into<Value>, coef: f64) -> Self {
        LinearTerm {
            column: column.to_string(),
            coef,
            level: Some(level.into()),
        }
    }
}

/// Generalized linear score with a single output column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearModel {
    pub intercept: f64,
    #[serde(default)]
    pub terms: Vec<LinearTerm>,
    #[serde(default)]
    pub link: Link,
}

impl LinearModel {
    pub fn logistic(intercept: f64, terms: Vec<LinearTerm>) -> Self {
        LinearModel {
            intercept,
            terms,
            link: Link::Logistic,
        }
    }

    /// The linear score before the link function.
    pub fn linear_predictor(&self, data: &Dataset) -> Result<Vec<f64>> {
        let mut z = vec![self.intercept; data.n_rows()];
        for term in &self.terms {
            let column = data
                .column(&term.column)
                .map_err(|_| ClotError::Predictor(format!("model column `{}` missing", term.column)))?;
            match (&term.level, &column.data) {
                (None, ColumnData::Numeric(v)) => {
                    for (zi, x) in z.iter_mut().zip(v) {
                        *zi += term.coef * x;
                    }
                }
                (None, ColumnData::Categorical(_)) => {
                    return Err(ClotError::Predictor(format!(
                        "numeric term on categorical column `{}`; give a level",
                        term.column
                    )))
                }
                (Some(level), data) => {
                    let level = data.coerce(level).ok_or_else(|| {
                        ClotError::Predictor(format!("level `{level}` does not fit column `{}`", term.column))
                    })?;
                    for (i, zi) in z.iter_mut().enumerate() {
                        if data.get(i) == level {
                            *zi += term.coef;
                        }
                    }
                }
            }
        }
        Ok(z)
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Predictor for LinearModel {
    fn output_dim(&self) -> usize {
        1
    }

    fn predict(&self, data: &Dataset) -> Result<Matrix> {
        let z = self.linear_predictor(data)?;
        let out: Vec<f64> = match self.link {
            Link::Identity => z,
            Link::Logistic => z.into_iter().map(sigmoid).collect(),
        };
        Ok(Matrix::column(&out))
    }
}

/// Canonical text of a key cell: numbers print in shortest round-trip form,
/// so `1`, `1.0` and `1e0` all match.
pub fn canonical_key(text: &str) -> String {
    let t = text.trim();
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => v.to_string(),
        _ => t.to_string(),
    }
}

/// Precomputed outputs looked up by the values of key columns. Intervened
/// rows need their own entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionTable {
    key_columns: Vec<String>,
    outputs: HashMap<Vec<String>, Vec<f64>>,
    dim: usize,
}

impl PredictionTable {
    pub fn new(key_columns: Vec<String>, entries: Vec<(Vec<String>, Vec<f64>)>) -> Result<Self> {
        let dim = entries.first().map_or(0, |e| e.1.len());
        if dim == 0 {
            return Err(ClotError::Predictor("prediction table has no outputs".into()));
        }
        let mut outputs = HashMap::with_capacity(entries.len());
        for (key, out) in entries {
            if key.len() != key_columns.len() || out.len() != dim {
                return Err(ClotError::Predictor("ragged prediction table row".into()));
            }
            if out.iter().any(|v| !v.is_finite()) {
                return Err(ClotError::Predictor("non-finite prediction".into()));
            }
            let key: Vec<String> = key.iter().map(|k| canonical_key(k)).collect();
            if let Some(prev) = outputs.insert(key.clone(), out.clone()) {
                if prev != out {
                    return Err(ClotError::Predictor(format!("conflicting predictions for key {key:?}")));
                }
            }
        }
        Ok(PredictionTable {
            key_columns,
            outputs,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

impl Predictor for PredictionTable {
    fn output_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, data: &Dataset) -> Result<Matrix> {
        let cols = self
            .key_columns
            .iter()
            .map(|c| data.column_index(c))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| ClotError::Predictor(e.to_string()))?;
        let mut out = Vec::with_capacity(data.n_rows() * self.dim);
        for row in 0..data.n_rows() {
            let key: Vec<String> = cols
                .iter()
                .map(|&c| canonical_key(&data.value(row, c).to_string()))
                .collect();
            let pred = self
                .outputs
                .get(&key)
                .ok_or_else(|| ClotError::Predictor(format!("no prediction for row {row} (key {key:?})")))?;
            out.extend_from_slice(pred);
        }
        Matrix::new(data.n_rows(), self.dim, out)
    }
}

/// Runs an external program per batch. Rows go to its standard input as CSV
/// with a header; it must print one CSV line of `output_dim` numbers per row,
/// in order, and exit with status 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
    pub output_dim: usize,
}

impl ExternalCommand {
    fn encode(data: &Dataset) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header: Vec<&str> = data.columns().iter().map(|c| c.name.as_str()).collect();
        let io_err = |e: csv::Error| ClotError::Predictor(format!("encoding rows: {e}"));
        w.write_record(&header).map_err(io_err)?;
        for row in 0..data.n_rows() {
            let record: Vec<String> = (0..data.columns().len())
                .map(|c| data.value(row, c).to_string())
                .collect();
            w.write_record(&record).map_err(io_err)?;
        }
        w.into_inner()
            .map_err(|e| ClotError::Predictor(format!("encoding rows: {e}")))
    }
}

impl Predictor for ExternalCommand {
    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn predict(&self, data: &Dataset) -> Result<Matrix> {
        let input = Self::encode(data)?;
        let fail = |msg: String| ClotError::Predictor(format!("`{}`: {msg}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(format!("spawn failed: {e}")))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let writer = std::thread::spawn(move || stdin.write_all(&input));
        let output = child
            .wait_with_output()
            .map_err(|e| fail(format!("wait failed: {e}")))?;
        // A program may exit without draining its input; only its status matters.
        let _ = writer.join();
        if !output.status.success() {
            return Err(fail(format!(
                "exited with {}: {}",
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }

        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(output.stdout.as_slice());
        let mut values = Vec::with_capacity(data.n_rows() * self.output_dim);
        let mut rows = 0;
        for record in reader.records() {
            let record = record.map_err(|e| fail(format!("bad output: {e}")))?;
            if record.len() != self.output_dim {
                return Err(fail(format!(
                    "output row {rows} has {} fields, expected {}",
                    record.len(),
                    self.output_dim
                )));
            }
            for field in record.iter() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| fail(format!("output row {rows}: `{field}` is not a number")))?;
                values.push(v);
            }
            rows += 1;
        }
        if rows != data.n_rows() {
            return Err(fail(format!("returned {rows} rows for {} inputs", data.n_rows())));
        }
        Matrix::new(rows, self.output_dim, values)
    }
}
