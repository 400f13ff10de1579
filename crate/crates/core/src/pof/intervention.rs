//! `do(a_t → a_t')` on a single sensitive column. Every other column is left
//! bit-identical.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{ColumnData, ColumnRole, Dataset, Value};
use crate::error::{ClotError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "operator", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Operator {
    /// Every row takes `value`.
    FixedReplacement { value: Value },
    /// Maps observed values through a bijection; unlisted values map to themselves.
    ValueSwap { map: Vec<(Value, Value)> },
    /// Each row draws uniformly from the observed domain.
    UniformRedraw,
    /// Every row takes a neutral reference value (the median for numeric columns).
    NeutralFill { value: Value },
}

impl Operator {
    pub fn name(&self) -> &'static str {
        match self {
            Operator::FixedReplacement { .. } => "fixed-replacement",
            Operator::ValueSwap { .. } => "value-swap",
            Operator::UniformRedraw => "uniform-redraw",
            Operator::NeutralFill { .. } => "neutral-fill",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    pub attribute: String,
    #[serde(flatten)]
    pub operator: Operator,
    #[serde(default)]
    pub seed: u64,
}

impl InterventionSpec {
    pub fn new(attribute: &str, operator: Operator) -> Self {
        InterventionSpec {
            attribute: attribute.to_string(),
            operator,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Swap map that leaves every value in place.
    pub fn identity(attribute: &str) -> Self {
        InterventionSpec::new(attribute, Operator::ValueSwap { map: Vec::new() })
    }
}

fn invalid(spec: &InterventionSpec, reason: impl Into<String>) -> ClotError {
    ClotError::InvalidIntervention {
        attribute: spec.attribute.clone(),
        reason: reason.into(),
    }
}

fn in_domain(data: &ColumnData, domain: &[Value], v: &Value) -> bool {
    match (data, v) {
        (ColumnData::Numeric(_), Value::Num(x)) => match (domain.first(), domain.last()) {
            (Some(Value::Num(lo)), Some(Value::Num(hi))) => *lo <= *x && *x <= *hi,
            _ => false,
        },
        _ => domain.binary_search(v).is_ok(),
    }
}

fn resolve_value(spec: &InterventionSpec, data: &ColumnData, domain: &[Value], v: &Value) -> Result<Value> {
    let v = data
        .coerce(v)
        .ok_or_else(|| invalid(spec, format!("value `{v}` does not match the column type")))?;
    if !in_domain(data, domain, &v) {
        return Err(invalid(spec, format!("value `{v}` lies outside the observed domain")));
    }
    Ok(v)
}

fn swap_table(
    spec: &InterventionSpec,
    data: &ColumnData,
    domain: &[Value],
    pairs: &[(Value, Value)],
) -> Result<BTreeMap<Value, Value>> {
    let mut table: BTreeMap<Value, Value> = domain.iter().map(|v| (v.clone(), v.clone())).collect();
    let mut seen = BTreeSet::new();
    for (from, to) in pairs {
        let from = data
            .coerce(from)
            .ok_or_else(|| invalid(spec, format!("swap key `{from}` does not match the column type")))?;
        let to = data
            .coerce(to)
            .ok_or_else(|| invalid(spec, format!("swap target `{to}` does not match the column type")))?;
        if domain.binary_search(&from).is_err() || domain.binary_search(&to).is_err() {
            return Err(invalid(spec, format!("swap pair `{from}` → `{to}` leaves the observed domain")));
        }
        if !seen.insert(from.clone()) {
            return Err(invalid(spec, format!("swap key `{from}` listed twice")));
        }
        table.insert(from, to);
    }
    let image: BTreeSet<&Value> = table.values().collect();
    if image.len() != table.len() {
        return Err(invalid(spec, "swap map is not a bijection on the observed domain"));
    }
    Ok(table)
}

pub fn apply_intervention(dataset: &Dataset, spec: &InterventionSpec) -> Result<Dataset> {
    let index = dataset.column_index(&spec.attribute)?;
    let column = &dataset.columns()[index];
    if column.role != ColumnRole::Sensitive {
        return Err(ClotError::NotSensitive(spec.attribute.clone()));
    }
    let data = &column.data;
    let domain = data.domain();
    let n = dataset.n_rows();
    let numeric = data.is_numeric();

    let values: Vec<Value> = match &spec.operator {
        Operator::FixedReplacement { value } | Operator::NeutralFill { value } => {
            let v = resolve_value(spec, data, &domain, value)?;
            vec![v; n]
        }
        Operator::ValueSwap { map } => {
            let table = swap_table(spec, data, &domain, map)?;
            (0..n).map(|i| table[&data.get(i)].clone()).collect()
        }
        Operator::UniformRedraw => {
            if domain.is_empty() {
                return Err(invalid(spec, "empty domain"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            (0..n)
                .map(|_| domain[rng.random_range(0..domain.len())].clone())
                .collect()
        }
    };
    Ok(dataset.with_column_data(index, ColumnData::from_values(numeric, values)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapDiagnostics {
    pub changed_rows: usize,
    pub total_rows: usize,
    pub distinct_before: usize,
    pub distinct_after: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

/// Counts the rows the intervention actually changes; warns when none do.
pub fn overlap_check(dataset: &Dataset, spec: &InterventionSpec) -> Result<OverlapDiagnostics> {
    let after = apply_intervention(dataset, spec)?;
    let before = &dataset.column(&spec.attribute)?.data;
    let post = &after.column(&spec.attribute)?.data;
    let changed_rows = (0..dataset.n_rows())
        .filter(|&i| before.get(i) != post.get(i))
        .count();
    let warning = if changed_rows == 0 {
        let msg = format!(
            "intervention `{}` on `{}` changes no rows; the counterfactual sample equals the factual one",
            spec.operator.name(),
            spec.attribute
        );
        warn!("{msg}");
        Some(msg)
    } else {
        None
    };
    Ok(OverlapDiagnostics {
        changed_rows,
        total_rows: dataset.n_rows(),
        distinct_before: before.domain().len(),
        distinct_after: post.domain().len(),
        warning,
    })
}

/// Binary columns swap their two values, other categorical columns redraw
/// uniformly, other numeric columns are filled with their median.
pub fn default_intervention(dataset: &Dataset, attribute: &str, seed: u64) -> Result<InterventionSpec> {
    let column = dataset.column(attribute)?;
    let domain = column.data.domain();
    let operator = match (&column.data, domain.len()) {
        (_, 2) => Operator::ValueSwap {
            map: vec![
                (domain[0].clone(), domain[1].clone()),
                (domain[1].clone(), domain[0].clone()),
            ],
        },
        (ColumnData::Categorical(_), _) => Operator::UniformRedraw,
        (ColumnData::Numeric(v), _) => Operator::NeutralFill {
            value: Value::Num(median(v)),
        },
    };
    Ok(InterventionSpec::new(attribute, operator).with_seed(seed))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
