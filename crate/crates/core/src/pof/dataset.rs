use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ClotError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ColumnRole {
    Sensitive,
    Observable,
    Outcome,
    Ignored,
}

/// A single cell. Numeric values order by `f64::total_cmp`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Cat(String),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.total_cmp(b),
            (Value::Cat(a), Value::Cat(b)) => a.cmp(b),
            (Value::Num(_), Value::Cat(_)) => Ordering::Less,
            (Value::Cat(_), Value::Num(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Cat(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Cat(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, ColumnData::Numeric(_))
    }

    pub fn get(&self, row: usize) -> Value {
        match self {
            ColumnData::Numeric(v) => Value::Num(v[row]),
            ColumnData::Categorical(v) => Value::Cat(v[row].clone()),
        }
    }

    /// Distinct values in ascending order.
    pub fn domain(&self) -> Vec<Value> {
        let set: BTreeSet<Value> = (0..self.len()).map(|i| self.get(i)).collect();
        set.into_iter().collect()
    }

    /// Converts `value` to this column's type; numeric text is parsed.
    pub fn coerce(&self, value: &Value) -> Option<Value> {
        match (self, value) {
            (ColumnData::Numeric(_), Value::Num(v)) => Some(Value::Num(*v)),
            (ColumnData::Numeric(_), Value::Cat(s)) => s.trim().parse().ok().map(Value::Num),
            (ColumnData::Categorical(_), Value::Cat(s)) => Some(Value::Cat(s.clone())),
            (ColumnData::Categorical(_), Value::Num(v)) => Some(Value::Cat(v.to_string())),
        }
    }

    pub(crate) fn from_values(numeric: bool, values: Vec<Value>) -> ColumnData {
        if numeric {
            ColumnData::Numeric(
                values
                    .into_iter()
                    .map(|v| match v {
                        Value::Num(x) => x,
                        Value::Cat(_) => unreachable!("coerced to numeric"),
                    })
                    .collect(),
            )
        } else {
            ColumnData::Categorical(values.into_iter().map(|v| v.to_string()).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub role: ColumnRole,
    pub data: ColumnData,
}

impl Column {
    pub fn numeric(name: &str, role: ColumnRole, values: Vec<f64>) -> Self {
        Column {
            name: name.to_string(),
            role,
            data: ColumnData::Numeric(values),
        }
    }

    pub fn categorical<S: Into<String>>(name: &str, role: ColumnRole, values: impl IntoIterator<Item = S>) -> Self {
        Column {
            name: name.to_string(),
            role,
            data: ColumnData::Categorical(values.into_iter().map(Into::into).collect()),
        }
    }
}

/// Columnar table with a role per column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    columns: Vec<Column>,
}

impl Dataset {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let rows = columns.first().map_or(0, |c| c.data.len());
        let mut names = BTreeSet::new();
        for c in &columns {
            if c.data.len() != rows {
                return Err(ClotError::InvalidDataset(format!(
                    "column `{}` has {} rows, expected {rows}",
                    c.name,
                    c.data.len()
                )));
            }
            if !names.insert(c.name.as_str()) {
                return Err(ClotError::InvalidDataset(format!("duplicate column `{}`", c.name)));
            }
            if let ColumnData::Numeric(v) = &c.data {
                if v.iter().any(|x| !x.is_finite()) {
                    return Err(ClotError::InvalidDataset(format!("non-finite value in `{}`", c.name)));
                }
            }
        }
        Ok(Dataset { columns })
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.data.len())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.columns
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| ClotError::UnknownColumn(name.to_string()))
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| ClotError::UnknownColumn(name.to_string()))
    }

    /// Sensitive column names in column order.
    pub fn sensitive_columns(&self) -> Vec<&str> {
        self.columns
            .iter()
            .filter(|c| c.role == ColumnRole::Sensitive)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn value(&self, row: usize, col: usize) -> Value {
        self.columns[col].data.get(row)
    }

    /// Checks the audit preconditions: at least one sensitive column, each
    /// taking at least two distinct values.
    pub fn validate_for_audit(&self) -> Result<()> {
        let sensitive = self.sensitive_columns();
        if sensitive.is_empty() {
            return Err(ClotError::InvalidDataset("no sensitive attribute to audit".into()));
        }
        for name in sensitive {
            let distinct = self.column(name)?.data.domain().len();
            if distinct < 2 {
                return Err(ClotError::InvalidDataset(format!(
                    "sensitive column `{name}` takes {distinct} distinct value(s); need at least 2"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn with_column_data(&self, index: usize, data: ColumnData) -> Dataset {
        let mut columns = self.columns.clone();
        columns[index].data = data;
        Dataset { columns }
    }
}
